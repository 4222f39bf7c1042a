"""Bootstrap - Estimasi varians: Salganik, Lu, DR, neighborhood (NB), dan NB ukuran tetap."""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from rds_core.errors import BootstrapError, ConfigError, VarianceError
from rds_core.estimators import (
    ESTIMATORS,
    EstimateReport,
    EstimatorSuite,
    SuiteFits,
    WEIGHT_SOURCES,
    WeightSource,
    evaluate_safely,
)
from rds_core.rng import spawn_stream
from rds_core.sampler import RDSSample

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100


class BootstrapMethod(Enum):
    SALGANIK = "salganik"
    LU = "lu"
    DR = "dr"
    NB = "nb"
    NB_FIXED = "nb-fixed"

    @property
    def refits(self) -> bool:
        return self in (BootstrapMethod.NB, BootstrapMethod.NB_FIXED)


METHOD_ORDER = list(BootstrapMethod)

DEFAULT_METHODS = {
    "vh": BootstrapMethod.SALGANIK,
    "sh": BootstrapMethod.SALGANIK,
    "lu": BootstrapMethod.LU,
    "dr_ii": BootstrapMethod.DR,
    "dr_ego": BootstrapMethod.DR,
    "mdr_ii": BootstrapMethod.NB_FIXED,
    "mdr_ego": BootstrapMethod.NB_FIXED,
}


@dataclass
class BootstrapConfig:
    method: Optional[BootstrapMethod] = None
    replicates: int = 200
    alpha: float = 0.05
    rng_seed: int = 0
    refit_max_iterations: int = 200
    methods: dict = field(default_factory=lambda: dict(DEFAULT_METHODS))
    threads: int = 1

    def __post_init__(self):
        if self.method is not None:
            self.method = BootstrapMethod(self.method)
        self.methods = {name: BootstrapMethod(m) for name, m in self.methods.items()}
        if self.replicates < 2:
            raise ConfigError(f"Jumlah replikasi bootstrap minimal 2, diberikan {self.replicates}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha harus di (0, 1), diberikan {self.alpha}")

    def method_for(self, estimator: str) -> BootstrapMethod:
        if self.method is not None:
            return self.method
        return self.methods.get(estimator, DEFAULT_METHODS[estimator])

    @classmethod
    def from_config(cls, config: dict, **overrides) -> "BootstrapConfig":
        section = config.get("bootstrap", {})
        fields = {
            "replicates": int(section.get("replicates", 200)),
            "alpha": float(section.get("alpha", 0.05)),
            "refit_max_iterations": int(section.get("refit_max_iterations", 200)),
            "methods": {**{k: v.value for k, v in DEFAULT_METHODS.items()}, **section.get("methods", {})},
        }
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**fields)

    def to_dict(self) -> dict:
        return {
            "method": None if self.method is None else self.method.value,
            "replicates": self.replicates,
            "alpha": self.alpha,
            "rng_seed": self.rng_seed,
            "refit_max_iterations": self.refit_max_iterations,
            "methods": {name: m.value for name, m in self.methods.items()},
        }


@dataclass
class Replicate:
    """Multiset posisi anggota sampel asli dengan struktur perekrut dalam replikasi."""

    positions: np.ndarray
    recruiter: np.ndarray
    method: BootstrapMethod
    restarts: int = 0

    @property
    def size(self) -> int:
        return len(self.positions)

    def as_sample(self, sample: RDSSample) -> RDSSample:
        return sample.select(self.positions, self.recruiter)


class ConfidenceInterval(NamedTuple):
    se: float
    lower: float
    upper: float
    clamped: bool = False


def normal_ci(estimates: Sequence[Optional[float]], point: float, alpha: float = 0.05) -> ConfidenceInterval:
    """se = simpangan baku replikasi (ddof=1); CI = point +/- z_(1-alpha/2) se, dipotong ke [0, 1]."""
    values = np.array([v for v in estimates if v is not None and math.isfinite(v)], dtype=float)
    if len(values) < 2:
        raise VarianceError(f"Dibutuhkan minimal 2 replikasi terdefinisi, tersedia {len(values)}")
    mean = math.fsum(values) / len(values)
    se = math.sqrt(math.fsum((values - mean) ** 2) / (len(values) - 1))
    quantile = float(stats.norm.ppf(1 - alpha / 2))
    lower, upper = point - quantile * se, point + quantile * se
    clamped = lower < 0 or upper > 1
    return ConfidenceInterval(se, max(lower, 0.0), min(upper, 1.0), clamped)


def _chain(positions: list[int], method: BootstrapMethod, restarts: int = 0) -> Replicate:
    recruiter = np.arange(-1, len(positions) - 1, dtype=np.int64)
    return Replicate(np.asarray(positions, dtype=np.int64), recruiter, method, restarts)


def salganik_replicate(sample: RDSSample, rng: np.random.Generator) -> Replicate:
    """Rantai: mulai dari anggota acak, lalu n-1 langkah dari R_z(anggota saat ini) dengan pengembalian."""
    z = np.asarray(sample.outcome, dtype=np.int64)
    recruiters, recruits = sample.recruitment_pairs()
    pools = {k: recruits[z[recruiters] == k] for k in (0, 1)}
    restarts = 0
    while restarts <= MAX_ATTEMPTS:
        chain = [int(rng.integers(sample.n))]
        while len(chain) < sample.n:
            pool = pools[z[chain[-1]]]
            if pool.size == 0:
                break
            chain.append(int(pool[rng.integers(pool.size)]))
        if len(chain) == sample.n:
            return _chain(chain, BootstrapMethod.SALGANIK, restarts)
        restarts += 1
    raise BootstrapError("Rantai Salganik terus mencapai kelas perekrut kosong", {"restarts": restarts})


def _group_chain(sample: RDSSample, groups: np.ndarray, matrix: np.ndarray, method: BootstrapMethod,
                 rng: np.random.Generator) -> Replicate:
    members = {k: np.flatnonzero(groups == k) for k in (0, 1)}
    chain = [int(rng.integers(sample.n))]
    while len(chain) < sample.n:
        target = 0 if rng.random() < matrix[groups[chain[-1]], 0] else 1
        pool = members[target]
        chain.append(int(pool[rng.integers(pool.size)]))
    return _chain(chain, method)


def lu_transition_matrix(sample: RDSSample) -> np.ndarray:
    """Matriks 2x2 C_kl^ego (bobot derajat); baris grup tanpa anggota tujuan tetap di grupnya."""
    z = np.asarray(sample.outcome, dtype=np.int64)
    degree = sample.degree
    cross = {0: sample.alter_counts("z", 1), 1: sample.alter_counts("z", 0)}
    matrix = np.eye(2)
    for k in (0, 1):
        in_k = z == k
        if not in_k.any() or not np.any(z == 1 - k):
            continue
        if np.any(degree[in_k] <= 0):
            raise BootstrapError(f"Derajat nol pada grup z={k}, C^ego tidak terdefinisi")
        c = float(np.mean(cross[k][in_k] / degree[in_k]))
        matrix[k, 1 - k], matrix[k, k] = c, 1.0 - c
    return matrix


def lu_replicate(sample: RDSSample, rng: np.random.Generator, matrix: Optional[np.ndarray] = None) -> Replicate:
    z = np.asarray(sample.outcome, dtype=np.int64)
    matrix = lu_transition_matrix(sample) if matrix is None else matrix
    return _group_chain(sample, z, matrix, BootstrapMethod.LU, rng)


def dr_transition_matrix(sample: RDSSample, phi: float, attr: str = "z") -> np.ndarray:
    """T[a, b] = jumlah tie dari U_a ke alter ber-u = b, diskalakan phi^b lalu dinormalisasi per baris."""
    u = np.asarray(sample.attribute(attr), dtype=np.int64)
    for a in (0, 1):
        if not np.any(u == a):
            raise BootstrapError(f"Grup u={a} kosong, bootstrap DR tidak terdefinisi", {"attr": attr})
    counts = {b: sample.alter_counts(attr, b) for b in (0, 1)}
    ties = np.array([[counts[b][u == a].sum() for b in (0, 1)] for a in (0, 1)], dtype=float)
    scaled = ties * np.array([1.0, phi])
    totals = scaled.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise BootstrapError("Grup u tanpa tie yang dilaporkan, baris matriks DR tidak terdefinisi")
    return scaled / totals


def dr_replicate(sample: RDSSample, phi: float, rng: np.random.Generator, attr: str = "z",
                 matrix: Optional[np.ndarray] = None) -> Replicate:
    u = np.asarray(sample.attribute(attr), dtype=np.int64)
    matrix = dr_transition_matrix(sample, phi, attr) if matrix is None else matrix
    return _group_chain(sample, u, matrix, BootstrapMethod.DR, rng)


def _clusters(sample: RDSSample) -> dict[int, np.ndarray]:
    recruiters, _ = sample.recruitment_pairs()
    if recruiters.size == 0:
        raise BootstrapError("Sampel tanpa perekrut, bootstrap neighborhood tidak terdefinisi")
    return {int(r): sample.children(int(r)) for r in np.unique(recruiters)}


def _assemble(selected: list[tuple[int, list[int]]], method: BootstrapMethod, restarts: int = 0) -> Replicate:
    positions, recruiter = [], []
    for head, children in selected:
        anchor = len(positions)
        positions.append(head)
        recruiter.append(-1)
        positions.extend(children)
        recruiter.extend([anchor] * len(children))
    return Replicate(np.asarray(positions, dtype=np.int64), np.asarray(recruiter, dtype=np.int64), method, restarts)


def nb_replicate(sample: RDSSample, rng: np.random.Generator,
                 clusters: Optional[dict[int, np.ndarray]] = None) -> Replicate:
    """r perekrut dengan pengembalian beserta seluruh rekrut langsungnya; ukuran dapat berbeda dari n."""
    clusters = clusters or _clusters(sample)
    heads = np.array(sorted(clusters))
    chosen = heads[rng.integers(heads.size, size=heads.size)]
    return _assemble([(int(h), clusters[int(h)].tolist()) for h in chosen], BootstrapMethod.NB)


def nb_fixed_replicate(sample: RDSSample, rng: np.random.Generator, coupons: Optional[int] = None,
                       clusters: Optional[dict[int, np.ndarray]] = None) -> Replicate:
    """NB ukuran tetap: n_b = n persis, setiap perekrut dalam replikasi mempertahankan >= 1 rekrut."""
    clusters = clusters or _clusters(sample)
    heads = np.array(sorted(clusters))
    c = coupons or sample.coupons or int(max(len(v) for v in clusters.values()))
    n = sample.n

    def draw(k: int) -> list[tuple[int, list[int]]]:
        return [(int(h), clusters[int(h)].tolist()) for h in heads[rng.integers(heads.size, size=k)]]

    for attempt in range(MAX_ATTEMPTS):
        selected = draw(math.ceil(n / (1 + c)))
        for _ in range(MAX_ATTEMPTS):
            delta = sum(1 + len(children) for _, children in selected) - n
            while delta < 0:
                selected += draw(math.ceil(-delta / (1 + c)))
                delta = sum(1 + len(children) for _, children in selected) - n
            if delta == 0:
                return _assemble(selected, BootstrapMethod.NB_FIXED, attempt)
            spare = sum(len(children) - 1 for _, children in selected)
            if spare >= delta:
                selected = _prune(selected, delta, rng)
                return _assemble(selected, BootstrapMethod.NB_FIXED, attempt)
            # pemangkasan individual tidak cukup: buang satu klaster utuh lalu ulangi
            fitting = [idx for idx, (_, children) in enumerate(selected) if 1 + len(children) <= delta]
            victim = fitting[rng.integers(len(fitting))] if fitting else int(rng.integers(len(selected)))
            selected.pop(victim)
        logger.debug(f"Percobaan NB ukuran tetap ke-{attempt + 1} gagal, diulang")
    raise BootstrapError(f"Replikasi NB ukuran tetap gagal setelah {MAX_ATTEMPTS} percobaan", {"n": n})


def _prune(selected: list[tuple[int, list[int]]], delta: int, rng: np.random.Generator) -> list:
    """Hapus delta rekrut individual secara seragam di antara rekrut yang dapat dihapus."""
    selected = [(head, list(children)) for head, children in selected]
    for _ in range(delta):
        slots = [(idx, slot) for idx, (_, children) in enumerate(selected)
                 if len(children) > 1 for slot in range(len(children))]
        idx, slot = slots[rng.integers(len(slots))]
        selected[idx][1].pop(slot)
    return selected


@dataclass
class BootstrapSummary:
    config: BootstrapConfig
    reports: dict = field(default_factory=dict)
    replicate_values: dict = field(default_factory=dict)
    replicate_fits: list = field(default_factory=list)
    restarts: int = 0

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "estimates": {name: report.to_dict() for name, report in self.reports.items()},
            "restarts": self.restarts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _generate(sample: RDSSample, method: BootstrapMethod, rng: np.random.Generator, suite: EstimatorSuite,
              fits: SuiteFits, cache: dict) -> Replicate:
    if method == BootstrapMethod.SALGANIK:
        return salganik_replicate(sample, rng)
    if method == BootstrapMethod.LU:
        return lu_replicate(sample, rng, cache.get("lu"))
    if method == BootstrapMethod.DR:
        return dr_replicate(sample, fits.dr.phi, rng, suite.dr_attr, cache.get("dr"))
    if method == BootstrapMethod.NB:
        return nb_replicate(sample, rng, cache.get("clusters"))
    return nb_fixed_replicate(sample, rng, clusters=cache.get("clusters"))


def _prepare(sample: RDSSample, method: BootstrapMethod, suite: EstimatorSuite, fits: SuiteFits) -> dict:
    if method == BootstrapMethod.LU:
        return {"lu": lu_transition_matrix(sample)}
    if method == BootstrapMethod.DR:
        if fits.dr is None:
            raise BootstrapError("Bootstrap DR membutuhkan phi hasil estimasi")
        return {"dr": dr_transition_matrix(sample, fits.dr.phi, suite.dr_attr)}
    if method.refits:
        return {"clusters": _clusters(sample)}
    return {}


def run_bootstrap(sample: RDSSample, config: BootstrapConfig, suite: Optional[EstimatorSuite] = None,
                  estimators: Sequence[str] = ESTIMATORS, fits: Optional[SuiteFits] = None) -> BootstrapSummary:
    """Evaluasi semua estimator pada satu himpunan replikasi per metode.

    Replikasi b dari metode m memakai stream ``spawn_stream(rng_seed, m, b)`` sehingga
    hasil tidak bergantung pada jumlah thread. Bootstrap MC memakai fit asli;
    varian NB melakukan refit per replikasi dengan warm start.
    """
    suite = suite or EstimatorSuite()
    fits = fits or suite.fit(sample, estimators)
    point = {r.estimator: r for r in suite.report(sample, estimators, fits)}
    summary = BootstrapSummary(config=config)

    groups: dict[BootstrapMethod, list[str]] = {}
    for name in estimators:
        groups.setdefault(config.method_for(name), []).append(name)

    for method, names in groups.items():
        cache = _prepare(sample, method, suite, fits)
        method_key = METHOD_ORDER.index(method)
        needs_fit = any(WEIGHT_SOURCES[name] != WeightSource.DEGREE for name in names)

        def one(b: int):
            rng = spawn_stream(config.rng_seed, method_key, b)
            replicate = _generate(sample, method, rng, suite, fits, cache)
            replica = replicate.as_sample(sample)
            if method.refits:
                values, refit = evaluate_safely(suite, replica, names, warm_start=fits,
                                                max_iterations=config.refit_max_iterations)
                failed = refit.failed or (needs_fit and refit.dr is None and refit.mdr is None)
                return values, replicate.restarts, refit, failed
            return suite.evaluate(replica, names, fits), replicate.restarts, None, False

        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(one, range(config.replicates)))
        else:
            results = [one(b) for b in range(config.replicates)]

        restarts = sum(r[1] for r in results)
        summary.restarts += restarts
        if method == BootstrapMethod.SALGANIK and restarts > 0.5 * config.replicates:
            raise BootstrapError(
                f"Bootstrap Salganik degeneratif: {restarts} restart untuk {config.replicates} replikasi",
                {"restarts": restarts},
            )
        refit_failures = sum(1 for r in results if r[3])
        if method.refits:
            summary.replicate_fits.extend(r[2].mdr for r in results if r[2] is not None and r[2].mdr is not None)
            if refit_failures:
                logger.warning(f"{refit_failures} refit replikasi gagal untuk metode {method.value}")

        for name in names:
            values = [r[0][name] for r in results]
            summary.replicate_values[name] = values
            summary.reports[name] = _finish(point[name], values, method, config, refit_failures)
    logger.info(f"Bootstrap selesai: B={config.replicates}, estimator={list(estimators)}")
    return summary


def _finish(report: EstimateReport, values: list, method: BootstrapMethod, config: BootstrapConfig,
            refit_failures: int) -> EstimateReport:
    undefined = sum(1 for v in values if v is None)
    report.bootstrap_method = method.value
    report.replicates = len(values)
    report.undefined_replicates = undefined
    report.refit_failures = refit_failures
    if undefined:
        logger.warning(f"{undefined} replikasi {report.estimator} tidak terdefinisi dan dibuang")
    if report.estimate is None:
        return report
    try:
        ci = normal_ci(values, report.estimate, config.alpha)
    except VarianceError as e:
        logger.warning(f"SE {report.estimator} tidak dapat dihitung: {e.message}")
        return report
    report.se, report.ci_lower, report.ci_upper, report.ci_clamped = ci.se, ci.lower, ci.upper, ci.clamped
    if ci.clamped:
        logger.warning(f"CI {report.estimator} dipotong ke [0, 1]")
    return report


def replicate_estimates(sample: RDSSample, method: BootstrapMethod, estimator: str, replicates: int,
                        rng_seed: int = 0, suite: Optional[EstimatorSuite] = None) -> list[Optional[float]]:
    """Nilai replikasi satu estimator di bawah satu metode."""
    config = BootstrapConfig(method=method, replicates=replicates, rng_seed=rng_seed)
    summary = run_bootstrap(sample, config, suite or EstimatorSuite(), [estimator])
    return summary.replicate_values[estimator]
