"""Estimators - Estimator prevalensi RDS: VH, SH, Lu, DR-II/ego, MDR-II/ego, dan konstanta penghubung ego-II."""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from rds_core.errors import DataError, EstimatorUndefinedError, RDSError, WeightError
from rds_core.inference import FitResult, fit_dr, fit_mdr
from rds_core.recruitment import (
    SCENARIO_COVARIATES,
    CovariateSpec,
    MDRModel,
    RecruitmentModel,
    covariate_matrix,
    required_attributes,
)
from rds_core.sampler import RDSSample

logger = logging.getLogger(__name__)

ESTIMATORS = ("vh", "sh", "lu", "dr_ii", "dr_ego", "mdr_ii", "mdr_ego")


class WeightSource(Enum):
    DEGREE = "degree"
    DR_STATIONARY = "dr-stationary"
    MDR_STATIONARY = "mdr-stationary"


WEIGHT_SOURCES = {
    "vh": WeightSource.DEGREE,
    "sh": WeightSource.DEGREE,
    "lu": WeightSource.DEGREE,
    "dr_ii": WeightSource.DR_STATIONARY,
    "dr_ego": WeightSource.DR_STATIONARY,
    "mdr_ii": WeightSource.MDR_STATIONARY,
    "mdr_ego": WeightSource.MDR_STATIONARY,
}


@dataclass
class Weights:
    """Peluang sampling per anggota, hanya diketahui sampai konstanta pengali."""

    values: np.ndarray
    source: WeightSource = WeightSource.DEGREE

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        bad = np.flatnonzero(~np.isfinite(self.values) | (self.values <= 0))
        if bad.size:
            raise WeightError(
                f"Bobot harus positif dan berhingga; {bad.size} anggota tidak valid (posisi pertama {int(bad[0])})",
                {"positions": bad[:10].tolist()},
            )

    @property
    def inverse(self) -> np.ndarray:
        return 1.0 / self.values


@dataclass
class MixingStats:
    c01: float
    c10: float
    d0: float
    d1: float
    method: str

    def prevalence(self) -> float:
        """mu = C01*D0 / (C01*D0 + C10*D1)."""
        numerator = self.c01 * self.d0
        denominator = numerator + self.c10 * self.d1
        if not math.isfinite(denominator) or denominator <= 0:
            raise EstimatorUndefinedError(
                f"Penyebut C01*D0 + C10*D1 nol untuk metode {self.method}", self.to_dict()
            )
        return numerator / denominator

    def to_dict(self) -> dict:
        return {"c01": self.c01, "c10": self.c10, "d0": self.d0, "d1": self.d1, "method": self.method}


def hajek(sample: RDSSample, values: Sequence[float], weights: Weights) -> float:
    """sum v_i/p_i / sum 1/p_i."""
    values = np.asarray(values, dtype=float)
    if len(values) != sample.n or len(weights.values) != sample.n:
        raise DataError("Panjang nilai atau bobot tidak sama dengan ukuran sampel")
    inverse = weights.inverse
    return float(math.fsum(values * inverse) / math.fsum(inverse))


def degree_weights(sample: RDSSample) -> Weights:
    return Weights(sample.degree, WeightSource.DEGREE)


def dr_weights(sample: RDSSample, phi: float, attr: str = "z") -> Weights:
    """phi^u_i (phi * d_i1 + d_i0) dari hitungan alter pada laporan ego."""
    if not phi > 0:
        raise WeightError(f"phi harus positif, diberikan {phi}")
    d1 = sample.alter_counts(attr, 1)
    d0 = sample.alter_counts(attr, 0)
    u = np.asarray(sample.attribute(attr), dtype=float)
    return Weights(phi ** u * (phi * d1 + d0), WeightSource.DR_STATIONARY)


def mdr_weights(sample: RDSSample, model: RecruitmentModel) -> Weights:
    """sum_j exp(x_ij'beta + r_i'alpha) atas alter yang dilaporkan, dinormalisasi di ruang log."""
    mdr = model.as_mdr()
    attrs = required_attributes(mdr.covariates)
    identity = sample.nodes if sample.nodes is not None else sample.ids
    log_weights = np.empty(sample.n)
    for p in range(sample.n):
        report = sample.report(p)
        ego = {a: sample.attribute(a)[[p]] for a in attrs}
        if report.size == 0:
            log_weights[p] = -math.inf
            continue
        alter_nodes = report.nodes if report.nodes is not None else np.full(report.size, -1)
        design = covariate_matrix(
            mdr.covariates, ego, {a: report.values(a) for a in attrs},
            np.full(report.size, identity[p]), alter_nodes, size=report.size,
        )
        utility = design @ mdr.beta
        peak = float(np.max(utility))
        log_weights[p] = peak + math.log(float(np.sum(np.exp(utility - peak))))
    if mdr.k1:
        node_design = covariate_matrix(mdr.node_covariates, {}, {a: sample.attribute(a) for a in
                                       required_attributes(mdr.node_covariates)}, size=sample.n)
        log_weights = log_weights + node_design @ mdr.alpha
    finite = log_weights[np.isfinite(log_weights)]
    shift = float(np.max(finite)) if finite.size else 0.0
    return Weights(np.exp(log_weights - shift), WeightSource.MDR_STATIONARY)


def _binary_outcome(sample: RDSSample) -> np.ndarray:
    z = np.asarray(sample.outcome, dtype=float)
    if np.any((z != 0) & (z != 1)):
        raise DataError("Outcome z harus biner")
    return z


def vh(sample: RDSSample) -> float:
    return hajek(sample, _binary_outcome(sample), degree_weights(sample))


def sh_mixing(sample: RDSSample) -> MixingStats:
    z = _binary_outcome(sample).astype(np.int64)
    degrees = degree_weights(sample)
    recruiters, recruits = sample.recruitment_pairs()
    c, d = {}, {}
    for k in (0, 1):
        from_k = z[recruiters] == k
        if not from_k.any():
            raise EstimatorUndefinedError(f"Tidak ada rekrutmen dari grup z={k}; C_{k}{1 - k} tidak terdefinisi")
        c[k] = float(np.count_nonzero(from_k & (z[recruits] == 1 - k)) / np.count_nonzero(from_k))
        in_k = z == k
        if not in_k.any():
            raise EstimatorUndefinedError(f"Tidak ada anggota grup z={k}; D_{k} tidak terdefinisi")
        d[k] = float(np.count_nonzero(in_k) / math.fsum(degrees.inverse[in_k]))
    return MixingStats(c01=c[0], c10=c[1], d0=d[0], d1=d[1], method="sh")


def sh(sample: RDSSample, homogeneous_limit: bool = False) -> float:
    """SH: C dari proporsi rekrutmen lintas grup, D dari Hajek derajat.

    Dengan ``homogeneous_limit``, sampel yang seluruhnya satu grup dikembalikan
    sebagai nilai limit (0 atau 1) alih-alih tidak terdefinisi.
    """
    z = _binary_outcome(sample)
    if homogeneous_limit and sample.n and np.all(z == z[0]):
        return float(z[0])
    return sh_mixing(sample).prevalence()


def ego_mixing(sample: RDSSample, weights: Weights, method: str = "ego") -> MixingStats:
    """C_k,1-k dan D_k tipe Hajek dengan bobot p_i; p_i = d_i memberikan estimator Lu."""
    z = _binary_outcome(sample)
    inverse = weights.inverse
    degrees = sample.degree
    cross = {0: sample.alter_counts("z", 1), 1: sample.alter_counts("z", 0)}
    c, d = {}, {}
    for k in (0, 1):
        in_k = z == k
        if not in_k.any():
            raise EstimatorUndefinedError(f"Tidak ada anggota grup z={k} dalam sampel")
        tie_mass = math.fsum(degrees[in_k] * inverse[in_k])
        if tie_mass <= 0:
            raise EstimatorUndefinedError(f"Grup z={k} tidak memiliki tie yang dilaporkan")
        c[k] = math.fsum(cross[k][in_k] * inverse[in_k]) / tie_mass
        d[k] = tie_mass / math.fsum(inverse[in_k])
    return MixingStats(c01=c[0], c10=c[1], d0=d[0], d1=d[1], method=method)


def lu(sample: RDSSample) -> float:
    return ego_mixing(sample, degree_weights(sample), method="ego").prevalence()


def _phi(fit: Union[FitResult, float]) -> float:
    return fit.phi if isinstance(fit, FitResult) else float(fit)


def dr_ii(sample: RDSSample, fit: Union[FitResult, float], attr: str = "z") -> float:
    return hajek(sample, _binary_outcome(sample), dr_weights(sample, _phi(fit), attr))


def dr_ego(sample: RDSSample, fit: Union[FitResult, float], attr: str = "z") -> float:
    return ego_mixing(sample, dr_weights(sample, _phi(fit), attr), method="ego-dr").prevalence()


def _model(fit: Union[FitResult, RecruitmentModel], spec: Optional[Sequence[CovariateSpec]]) -> MDRModel:
    if isinstance(fit, FitResult):
        covariates = list(spec) if spec is not None else fit.covariates
        return MDRModel(covariates, fit.beta_hat)
    return fit.as_mdr()


def mdr_ii(sample: RDSSample, fit: Union[FitResult, RecruitmentModel],
           spec: Optional[Sequence[CovariateSpec]] = None) -> float:
    return hajek(sample, _binary_outcome(sample), mdr_weights(sample, _model(fit, spec)))


def mdr_ego(sample: RDSSample, fit: Union[FitResult, RecruitmentModel],
            spec: Optional[Sequence[CovariateSpec]] = None) -> float:
    weights = mdr_weights(sample, _model(fit, spec))
    return ego_mixing(sample, weights, method="ego-mdr").prevalence()


def ego_ii_constant(sample: RDSSample, weights: Weights) -> float:
    """c = sum z_i d_i0 / p_i / sum (1 - z_i) d_i1 / p_i, dengan d_ik hitungan alter berstatus z = k."""
    z = _binary_outcome(sample)
    inverse = weights.inverse
    numerator = math.fsum(z * sample.alter_counts("z", 0) * inverse)
    denominator = math.fsum((1 - z) * sample.alter_counts("z", 1) * inverse)
    if denominator <= 0:
        raise EstimatorUndefinedError("Sampel degeneratif: penyebut konstanta ego-II nol")
    return numerator / denominator


def ego_from_ii(mu_ii: float, c: float) -> float:
    return mu_ii / (mu_ii + (1.0 - mu_ii) * c)


@dataclass
class EstimateReport:
    estimator: str
    estimate: Optional[float]
    status: str = "ok"
    weight_source: str = WeightSource.DEGREE.value
    mode: str = "simulation"
    reason: Optional[str] = None
    se: Optional[float] = None
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    bootstrap_method: Optional[str] = None
    replicates: int = 0
    undefined_replicates: int = 0
    refit_failures: int = 0
    ci_clamped: bool = False

    @property
    def defined(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "estimate": self.estimate,
            "status": self.status,
            "weight_source": self.weight_source,
            "mode": self.mode,
            "reason": self.reason,
            "se": self.se,
            "ci": None if self.ci_lower is None else [self.ci_lower, self.ci_upper],
            "bootstrap_method": self.bootstrap_method,
            "replicates": self.replicates,
            "undefined_replicates": self.undefined_replicates,
            "refit_failures": self.refit_failures,
            "ci_clamped": self.ci_clamped,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class SuiteFits:
    dr: Optional[FitResult] = None
    mdr: Optional[FitResult] = None

    @property
    def failed(self) -> bool:
        return any(fit is not None and not fit.converged for fit in (self.dr, self.mdr))


@dataclass
class EstimatorSuite:
    """Evaluasi sekumpulan estimator pada satu sampel dengan kecocokan DR/MDR bersama."""

    covariates: list = field(default_factory=lambda: list(SCENARIO_COVARIATES))
    dr_attr: str = "z"
    max_iterations: int = 500
    gtol: float = 1e-8
    rtol: float = 1e-12
    standardize: bool = False
    homogeneous_limit: bool = False

    @classmethod
    def from_config(cls, config: dict, covariates: Optional[Sequence[CovariateSpec]] = None) -> "EstimatorSuite":
        inference = config.get("inference", {})
        return cls(
            covariates=list(covariates) if covariates is not None else list(SCENARIO_COVARIATES),
            max_iterations=int(inference.get("max_iterations", 500)),
            gtol=float(inference.get("gradient_tolerance", 1e-8)),
            rtol=float(inference.get("relative_tolerance", 1e-12)),
            standardize=bool(inference.get("standardize", False)),
        )

    def fit(self, sample: RDSSample, estimators: Sequence[str], warm_start: Optional[SuiteFits] = None,
            max_iterations: Optional[int] = None) -> SuiteFits:
        options = {
            "max_iterations": max_iterations or self.max_iterations,
            "gtol": self.gtol,
            "rtol": self.rtol,
            "standardize": self.standardize,
        }
        fits = SuiteFits()
        if any(name.startswith("dr_") for name in estimators):
            init = warm_start.dr.beta_hat if warm_start and warm_start.dr else None
            fits.dr = fit_dr(sample, self.dr_attr, init=init, **options)
        if any(name.startswith("mdr_") for name in estimators):
            init = warm_start.mdr.beta_hat if warm_start and warm_start.mdr else None
            fits.mdr = fit_mdr(sample, self.covariates, init=init, **options)
        return fits

    def estimate(self, sample: RDSSample, name: str, fits: SuiteFits) -> float:
        if name == "vh":
            return vh(sample)
        if name == "sh":
            return sh(sample, self.homogeneous_limit)
        if name == "lu":
            return lu(sample)
        if name == "dr_ii":
            return dr_ii(sample, fits.dr, self.dr_attr)
        if name == "dr_ego":
            return dr_ego(sample, fits.dr, self.dr_attr)
        if name == "mdr_ii":
            return mdr_ii(sample, fits.mdr)
        if name == "mdr_ego":
            return mdr_ego(sample, fits.mdr)
        raise DataError(f"Estimator tidak dikenal: {name}", {"known": list(ESTIMATORS)})

    def evaluate(self, sample: RDSSample, estimators: Sequence[str] = ESTIMATORS,
                 fits: Optional[SuiteFits] = None) -> dict[str, Optional[float]]:
        """Nilai per estimator; None bila tidak terdefinisi pada sampel ini."""
        fits = fits or self.fit(sample, estimators)
        values: dict[str, Optional[float]] = {}
        for name in estimators:
            try:
                values[name] = self.estimate(sample, name, fits)
            except (EstimatorUndefinedError, WeightError) as e:
                logger.debug(f"Estimator {name} tidak terdefinisi: {e}")
                values[name] = None
        return values

    def report(self, sample: RDSSample, estimators: Sequence[str] = ESTIMATORS,
               fits: Optional[SuiteFits] = None) -> list[EstimateReport]:
        fits = fits or self.fit(sample, estimators)
        reports = []
        for name in estimators:
            try:
                value, status, reason = self.estimate(sample, name, fits), "ok", None
            except (EstimatorUndefinedError, WeightError) as e:
                value, status, reason = None, "undefined", e.message
                logger.warning(f"Estimator {name} tidak terdefinisi: {e.message}")
            reports.append(EstimateReport(
                estimator=name,
                estimate=value,
                status=status,
                weight_source=WEIGHT_SOURCES[name].value,
                mode=sample.mode.value,
                reason=reason,
            ))
        return reports


def evaluate_safely(suite: EstimatorSuite, sample: RDSSample, estimators: Sequence[str],
                    warm_start: Optional[SuiteFits] = None,
                    max_iterations: Optional[int] = None) -> tuple[dict[str, Optional[float]], SuiteFits]:
    """Seperti ``evaluate`` tetapi kegagalan fit dicatat sebagai estimasi tidak terdefinisi."""
    try:
        fits = suite.fit(sample, estimators, warm_start=warm_start, max_iterations=max_iterations)
    except RDSError as e:
        logger.debug(f"Fit gagal: {e}")
        plain = [name for name in estimators if WEIGHT_SOURCES[name] == WeightSource.DEGREE]
        values = suite.evaluate(sample, plain, SuiteFits())
        return {name: values.get(name) for name in estimators}, SuiteFits()
    return suite.evaluate(sample, estimators, fits), fits
