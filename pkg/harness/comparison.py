"""Comparison - Uji beda MSE berpasangan terhadap estimator terbaik dengan koreksi Bonferroni."""

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from rds_core.errors import DataError

logger = logging.getLogger(__name__)


@dataclass
class ComparisonRow:
    estimator: str
    mse: float
    rmse: float
    p_value: Optional[float] = None
    indistinguishable: bool = True
    best: bool = False

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "mse": self.mse,
            "rmse": self.rmse,
            "p_value": self.p_value,
            "indistinguishable": self.indistinguishable,
            "best": self.best,
        }


@dataclass
class ComparisonTable:
    best: str
    alpha: float
    threshold: float
    rows: list = field(default_factory=list)

    @property
    def best_set(self) -> list[str]:
        return [row.estimator for row in self.rows if row.indistinguishable]

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "best_set": self.best_set,
            "rows": [row.to_dict() for row in self.rows],
        }


def _paired_p_value(errors: np.ndarray, best_errors: np.ndarray) -> float:
    """p dua sisi uji t berpasangan atas galat kuadrat; selisih konstan tidak memiliki variansi."""
    if errors.size < 2:
        return 1.0
    differences = errors - best_errors
    if np.all(differences == differences[0]):
        return 1.0 if differences[0] == 0.0 else 0.0
    return float(stats.ttest_rel(errors, best_errors).pvalue)


def bonferroni_mse_compare(traces: Mapping[str, Sequence[Optional[float]]], alpha: float = 0.05) -> ComparisonTable:
    """Bandingkan galat kuadrat tiap estimator dengan estimator RMSE minimum.

    Trace dipasangkan per sampel; pasangan dengan nilai None dibuang. Estimator
    ditandai tidak terbedakan bila p >= alpha / (jumlah pembanding).
    """
    if len(traces) < 2:
        raise DataError("Perbandingan membutuhkan minimal 2 estimator")
    lengths = {name: len(values) for name, values in traces.items()}
    if len(set(lengths.values())) != 1:
        raise DataError("Panjang trace galat kuadrat tidak sama", {"lengths": lengths})

    arrays = {name: np.array([np.nan if v is None else v for v in values], dtype=float)
              for name, values in traces.items()}
    mse = {name: float(np.nanmean(values)) if np.any(~np.isnan(values)) else math.inf
           for name, values in arrays.items()}
    best = min(mse, key=lambda name: (mse[name], name))
    threshold = alpha / (len(traces) - 1)

    rows = []
    for name, values in arrays.items():
        row = ComparisonRow(estimator=name, mse=mse[name], rmse=math.sqrt(mse[name]), best=name == best)
        if name != best:
            paired = ~np.isnan(values) & ~np.isnan(arrays[best])
            row.p_value = _paired_p_value(values[paired], arrays[best][paired])
            row.indistinguishable = row.p_value >= threshold
        rows.append(row)
    logger.info(f"Estimator RMSE minimum: {best}; tidak terbedakan: "
                f"{[r.estimator for r in rows if r.indistinguishable and not r.best]}")
    return ComparisonTable(best=best, alpha=alpha, threshold=threshold, rows=rows)
