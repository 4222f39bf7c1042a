"""Inference - Estimasi maximum likelihood phi (DR) dan beta (MDR) dari sampel RDS."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from rds_core.errors import DataError, NumericError
from rds_core.optimizer import minimize_bfgs
from rds_core.recruitment import CovariateSpec, MDRModel, RecruitmentModel, covariate_matrix, required_attributes
from rds_core.sampler import RDSSample

logger = logging.getLogger(__name__)

SEPARATION_LIMIT = 15.0

ModelSpec = Union[Sequence[CovariateSpec], RecruitmentModel]


def _covariates(spec: ModelSpec) -> list[CovariateSpec]:
    if isinstance(spec, RecruitmentModel):
        return spec.as_mdr().covariates
    return list(spec)


@dataclass
class ChoiceData:
    """Kontras x_il - x_ij per alter l dari perekrut i untuk setiap rekrut j.

    ``starts`` menandai awal blok alter tiap rekrut sehingga log-sum-exp per
    pilihan dihitung dengan ``reduceat``.
    """

    contrasts: np.ndarray
    starts: np.ndarray
    group: np.ndarray
    recruits: np.ndarray
    names: list

    @property
    def n_choices(self) -> int:
        return len(self.starts)

    @classmethod
    def from_sample(cls, sample: RDSSample, covariates: Sequence[CovariateSpec]) -> "ChoiceData":
        covariates = list(covariates)
        attrs = required_attributes(covariates)
        identity = sample.nodes if sample.nodes is not None else sample.ids
        recruiters, recruits = sample.recruitment_pairs()
        blocks, starts = [], []
        offset = 0
        for i, j in zip(recruiters, recruits):
            report = sample.ego_reports[i]
            if report is None:
                raise DataError(
                    f"Laporan ego perekrut dari anggota {int(sample.ids[j])} tidak tersedia",
                    {"member": int(sample.ids[j]), "recruiter": int(sample.ids[i])},
                )
            if report.size == 0:
                raise DataError(f"Perekrut {int(sample.ids[i])} tidak melaporkan alter", {"member": int(sample.ids[i])})
            ego = {a: sample.attribute(a)[[i]] for a in attrs}
            chosen = covariate_matrix(
                covariates, ego, {a: sample.attribute(a)[[j]] for a in attrs},
                identity[[i]], identity[[j]], size=1,
            )
            alter_nodes = report.nodes if report.nodes is not None else np.full(report.size, -1)
            alters = covariate_matrix(
                covariates, ego, {a: report.values(a) for a in attrs},
                np.full(report.size, identity[i]), alter_nodes, size=report.size,
            )
            blocks.append(alters - chosen)
            starts.append(offset)
            offset += report.size
        width = len(covariates)
        contrasts = np.vstack(blocks) if blocks else np.zeros((0, width))
        starts = np.asarray(starts, dtype=np.int64)
        sizes = np.diff(np.append(starts, offset))
        group = np.repeat(np.arange(len(starts)), sizes)
        return cls(contrasts, starts, group, np.asarray(recruits), [c.name for c in covariates])

    def log_sum_exp(self, beta: np.ndarray) -> np.ndarray:
        utility = self.contrasts @ beta
        peak = np.maximum.reduceat(utility, self.starts)
        total = np.add.reduceat(np.exp(utility - peak[self.group]), self.starts)
        return peak + np.log(total)

    def log_likelihood(self, beta: np.ndarray) -> float:
        if self.n_choices == 0:
            return 0.0
        return -float(math.fsum(self.log_sum_exp(beta)))

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        """sum_j sum_l w_l (x_ij - x_il) dengan w bobot softmax perekrut."""
        if self.n_choices == 0:
            return np.zeros(self.contrasts.shape[1])
        lse = self.log_sum_exp(beta)
        weights = np.exp(self.contrasts @ beta - lse[self.group])
        return -(weights[:, None] * self.contrasts).sum(axis=0)

    def constant_columns(self) -> list[int]:
        if self.contrasts.shape[0] == 0:
            return list(range(self.contrasts.shape[1]))
        return [k for k in range(self.contrasts.shape[1]) if np.all(self.contrasts[:, k] == 0)]


def log_likelihood(sample: RDSSample, spec: ModelSpec, beta: Sequence[float]) -> float:
    """Log-likelihood rekrutmen non-seed dengan penyebut atas alter yang dilaporkan perekrut."""
    return ChoiceData.from_sample(sample, _covariates(spec)).log_likelihood(np.asarray(beta, dtype=float))


def log_likelihood_gradient(sample: RDSSample, spec: ModelSpec, beta: Sequence[float]) -> np.ndarray:
    return ChoiceData.from_sample(sample, _covariates(spec)).gradient(np.asarray(beta, dtype=float))


@dataclass
class FitResult:
    beta_hat: np.ndarray
    log_lik: float
    converged: bool
    iterations: int
    gradient_norm: float
    names: list = field(default_factory=list)
    identifiability_warnings: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    method: str = "bfgs"
    n_recruits: int = 0
    covariates: list = field(default_factory=list, repr=False)

    @property
    def phi(self) -> float:
        """exp(beta) untuk kecocokan DR satu dimensi."""
        return float(math.exp(self.beta_hat[0]))

    def model(self) -> MDRModel:
        return MDRModel(self.covariates, self.beta_hat)

    def to_dict(self) -> dict:
        data = {
            "beta_hat": [float(b) for b in self.beta_hat],
            "names": list(self.names),
            "log_lik": self.log_lik,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "method": self.method,
            "n_recruits": self.n_recruits,
            "identifiability_warnings": list(self.identifiability_warnings),
            "warnings": list(self.warnings),
        }
        if len(self.beta_hat) == 1:
            data["phi_hat"] = self.phi
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_mdr(sample: RDSSample, spec: ModelSpec, init: Optional[Sequence[float]] = None,
            max_iterations: int = 500, gtol: float = 1e-8, rtol: float = 1e-12,
            standardize: bool = False, choices: Optional[ChoiceData] = None) -> FitResult:
    """Quasi-Newton pada log-likelihood MDR mulai dari ``init`` (default beta = 0)."""
    covariates = _covariates(spec)
    if sample.n_recruits == 0:
        raise DataError("Sampel tidak memiliki rekrut non-seed, beta tidak dapat diestimasi")
    choices = choices or ChoiceData.from_sample(sample, covariates)
    width = len(covariates)
    beta0 = np.zeros(width) if init is None else np.asarray(init, dtype=float).copy()

    scale = np.ones(width)
    data = choices
    if standardize and width:
        spread = np.std(choices.contrasts, axis=0)
        scale = np.where(spread > 0, spread, 1.0)
        data = ChoiceData(choices.contrasts / scale, choices.starts, choices.group, choices.recruits, choices.names)
        beta0 = beta0 * scale

    start_value = data.log_likelihood(beta0)
    if not math.isfinite(start_value):
        raise NumericError("Log-likelihood tidak berhingga pada titik awal", {"init": beta0.tolist()})

    identifiability = [
        f"Kovariat '{choices.names[k]}' konstan di semua kontras pilihan; koefisien tidak teridentifikasi"
        for k in choices.constant_columns()
    ]
    for message in identifiability:
        logger.warning(message)

    outcome = minimize_bfgs(
        lambda b: -data.log_likelihood(b), lambda b: -data.gradient(b),
        beta0, max_iterations=max_iterations, gtol=gtol, rtol=rtol,
    )
    beta_hat = outcome.x / scale
    warnings = list(outcome.messages)
    if not outcome.converged:
        logger.warning(f"Estimasi MDR tidak konvergen setelah {outcome.iterations} iterasi")
    drifted = [choices.names[k] for k in np.flatnonzero(np.abs(beta_hat) > SEPARATION_LIMIT)]
    if drifted:
        message = f"Kemungkinan separasi: |beta| > {SEPARATION_LIMIT:g} untuk {', '.join(drifted)}"
        warnings.append(message)
        logger.warning(message)

    result = FitResult(
        beta_hat=beta_hat,
        log_lik=choices.log_likelihood(beta_hat),
        converged=outcome.converged,
        iterations=outcome.iterations,
        gradient_norm=float(np.max(np.abs(choices.gradient(beta_hat)), initial=0.0)),
        names=choices.names,
        identifiability_warnings=identifiability,
        warnings=warnings,
        method=outcome.method,
        n_recruits=choices.n_choices,
        covariates=covariates,
    )
    logger.info(
        f"Estimasi MDR selesai: beta={np.round(beta_hat, 4).tolist()}, logL={result.log_lik:.4f}, "
        f"iterasi={result.iterations}, konvergen={result.converged}"
    )
    return result


def _check_binary(sample: RDSSample, attr: str):
    values = [sample.attribute(attr)]
    values += [report.values(attr) for report in sample.ego_reports if report is not None]
    merged = np.concatenate([np.asarray(v, dtype=float) for v in values])
    if np.any((merged != 0) & (merged != 1)):
        raise DataError(f"Atribut '{attr}' harus biner pada anggota dan alter", {"attr": attr})


def fit_dr(sample: RDSSample, attr: str = "z", **options) -> FitResult:
    """phi_hat = exp(beta_hat) untuk satu kovariat node biner u."""
    _check_binary(sample, attr)
    result = fit_mdr(sample, [CovariateSpec.node(attr)], **options)
    logger.info(f"Estimasi DR: phi={result.phi:.4f} untuk atribut '{attr}'")
    return result


def coefficient_intervals(fits: Sequence[FitResult], point: FitResult, alpha: float = 0.05) -> list[dict]:
    """Interval normal untuk tiap koefisien dari refit per replikasi bootstrap."""
    betas = np.array([fit.beta_hat for fit in fits if fit.converged])
    quantile = float(stats.norm.ppf(1 - alpha / 2))
    rows = []
    for k, name in enumerate(point.names):
        se = float(np.std(betas[:, k], ddof=1)) if len(betas) >= 2 else float("nan")
        estimate = float(point.beta_hat[k])
        rows.append({
            "name": name,
            "estimate": estimate,
            "se": se,
            "lower": estimate - quantile * se,
            "upper": estimate + quantile * se,
            "replicates": int(len(betas)),
        })
    return rows
