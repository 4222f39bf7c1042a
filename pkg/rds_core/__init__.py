"""RDS Core - Model rekrutmen MDR, estimasi, estimator prevalensi, dan bootstrap."""

__version__ = "1.0.0"
