"""Netgen - Pembangkitan populasi sintetis: usia Gamma, infeksi logistik, ERGM dyad-independen."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import expit

from rds_core.errors import CalibrationError, ConfigError, GenerationError, UndefinedRatioError
from rds_core.population import Population
from rds_core.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

DEFAULT_TAU_THRESHOLD = 5.0
SEARCH_BOX = (-20.0, 0.0)


@dataclass(frozen=True)
class ErgmParams:
    eta1: float
    eta2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eta1) and math.isfinite(self.eta2)):
            raise ConfigError("Parameter ERGM harus bilangan real berhingga", asdict(self))

    def tie_probability(self, age_gap) -> np.ndarray:
        return expit(self.eta1 + self.eta2 * np.asarray(age_gap, dtype=float))

    def to_dict(self) -> dict:
        return {"eta1": self.eta1, "eta2": self.eta2}

    @classmethod
    def from_dict(cls, data: dict) -> "ErgmParams":
        return cls(eta1=float(data["eta1"]), eta2=float(data.get("eta2", 0.0)))


HOMOPHILY_LEVELS = {
    "none": ErgmParams(-4.41, 0.0),
    "moderate": ErgmParams(-3.60, -0.19),
    "high": ErgmParams(-3.27, -0.28),
}

HOMOPHILY_TAU_TARGETS = {"none": 1.0, "moderate": 3.2, "high": 5.1}


@dataclass
class PopulationRecipe:
    n: int = 1000
    age_shape: float = 26.0
    age_rate: float = 1.0
    logit_intercept: float = -4.0
    logit_slope: float = 0.09
    ergm: ErgmParams = field(default_factory=lambda: HOMOPHILY_LEVELS["none"])
    rng_seed: int = 0
    max_retries: int = 100

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"Ukuran populasi minimal 2, diberikan {self.n}")
        if self.age_shape <= 0 or self.age_rate <= 0:
            raise ConfigError("Parameter Gamma (shape, rate) harus positif")
        if self.max_retries < 1:
            raise ConfigError("max_retries minimal 1")
        if isinstance(self.ergm, dict):
            self.ergm = ErgmParams.from_dict(self.ergm)

    def infection_probability(self, age) -> np.ndarray:
        return expit(self.logit_intercept + self.logit_slope * np.asarray(age, dtype=float))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["ergm"] = self.ergm.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PopulationRecipe":
        fields = dict(data)
        if "ergm" in fields:
            fields["ergm"] = ErgmParams.from_dict(fields["ergm"])
        return cls(**fields)

    @classmethod
    def for_level(cls, level: str, **overrides) -> "PopulationRecipe":
        if level not in HOMOPHILY_LEVELS:
            raise ConfigError(f"Level homofili tidak dikenal: {level}", {"levels": list(HOMOPHILY_LEVELS)})
        return cls(ergm=HOMOPHILY_LEVELS[level], **overrides)

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: str) -> "PopulationRecipe":
        try:
            with open(path, "r") as f:
                return cls.from_dict(json.load(f))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Resep populasi tidak valid: {e}", {"path": path})


def _draw_ties(ages: np.ndarray, ergm: ErgmParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = len(ages)
    lo_parts, hi_parts = [], []
    for i in range(n - 1):
        gap = np.abs(ages[i] - ages[i + 1:])
        hits = np.flatnonzero(rng.random(n - i - 1) < ergm.tie_probability(gap))
        if hits.size:
            lo_parts.append(np.full(hits.size, i, dtype=np.int64))
            hi_parts.append(hits + i + 1)
    if not lo_parts:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(lo_parts), np.concatenate(hi_parts)


def draw_population(recipe: PopulationRecipe, rng: SeedLike = None) -> Population:
    """Usia ~ Gamma, z ~ Bernoulli(expit(a + b*usia)), tie ~ Bernoulli(expit(eta1 + eta2*|selisih usia|)).

    Jaringan dengan node terisolasi dibuang dan seluruh jaringan (usia, z, tie)
    digambar ulang, maksimal ``recipe.max_retries`` kali.
    """
    rng = make_rng(recipe.rng_seed if rng is None else rng)

    for attempt in range(1, recipe.max_retries + 1):
        ages = rng.gamma(recipe.age_shape, 1.0 / recipe.age_rate, size=recipe.n)
        infection = (rng.random(recipe.n) < recipe.infection_probability(ages)).astype(np.int64)
        lo, hi = _draw_ties(ages, recipe.ergm, rng)
        degrees = np.bincount(np.concatenate([lo, hi]), minlength=recipe.n)
        isolated = int(np.count_nonzero(degrees == 0))
        if isolated == 0:
            pop = Population.from_pairs(recipe.n, lo, hi, ages, infection, validate=False)
            logger.info(
                f"Populasi dibangkitkan: n={pop.n}, rata-rata derajat={degrees.mean():.2f}, "
                f"prevalensi={pop.true_prevalence():.3f}, percobaan={attempt}"
            )
            return pop
        logger.debug(f"Percobaan {attempt}: {isolated} node terisolasi, jaringan dibuang")

    raise GenerationError(
        f"Gagal membangkitkan jaringan tanpa node terisolasi setelah {recipe.max_retries} percobaan",
        {"attempts": recipe.max_retries},
    )


def _dyad_class_counts(ages: np.ndarray, threshold: float) -> tuple[int, int]:
    sorted_ages = np.sort(ages)
    n = len(sorted_ages)
    upper = np.searchsorted(sorted_ages, sorted_ages + threshold, side="right")
    close = int(np.sum(upper - np.arange(n) - 1))
    return close, n * (n - 1) // 2 - close


def estimate_tau(pop: Population, threshold_years: float = DEFAULT_TAU_THRESHOLD) -> float:
    """Rasio frekuensi tie empiris antara dyad |selisih usia| <= ambang dan > ambang."""
    close_dyads, far_dyads = _dyad_class_counts(pop.ages, threshold_years)
    if close_dyads == 0 or far_dyads == 0:
        raise UndefinedRatioError(
            "Salah satu kelas dyad kosong, tau tidak terdefinisi",
            {"close_dyads": close_dyads, "far_dyads": far_dyads},
        )
    edges = pop.edge_list()
    gaps = np.abs(pop.ages[edges[:, 0]] - pop.ages[edges[:, 1]])
    close_ties = int(np.count_nonzero(gaps <= threshold_years))
    far_ties = len(gaps) - close_ties
    if far_ties == 0:
        logger.warning("Tidak ada tie pada dyad jauh, tau bernilai tak hingga")
        return math.inf
    return (close_ties / close_dyads) / (far_ties / far_dyads)


class _AgePairs:
    def __init__(self, age_sample: Sequence[float], n_pairs: int, threshold: float, rng: np.random.Generator):
        ages = np.asarray(age_sample, dtype=float)
        if len(ages) < 2:
            raise CalibrationError("Sampel usia minimal berisi 2 nilai")
        self.population_size = len(ages)
        i = rng.integers(0, len(ages), size=n_pairs)
        j = rng.integers(0, len(ages) - 1, size=n_pairs)
        j = j + (j >= i)
        self.gaps = np.abs(ages[i] - ages[j])
        self.close = self.gaps <= threshold
        if self.close.all() or not self.close.any():
            raise CalibrationError("Pasangan usia tidak mencakup kedua kelas dyad")

    def mean_degree(self, params: ErgmParams) -> float:
        return (self.population_size - 1) * float(params.tie_probability(self.gaps).mean())

    def tau(self, params: ErgmParams) -> float:
        p = params.tie_probability(self.gaps)
        return float(p[self.close].mean() / p[~self.close].mean())


def _solve(fn, target: float, lo: float, hi: float, xtol: float = 1e-10) -> float:
    """Akar fn(x) = target untuk fn monoton naik di [lo, hi] (bracketing Brent)."""
    f_lo, f_hi = fn(lo) - target, fn(hi) - target
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(
            f"Target {target} di luar jangkauan [{f_lo + target:.4g}, {f_hi + target:.4g}] pada kotak pencarian",
            {"lo": lo, "hi": hi},
        )
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return float(optimize.brentq(lambda x: fn(x) - target, lo, hi, xtol=xtol))


def calibrate_eta(target_tau: float, target_mean_degree: float, age_sample: Sequence[float],
                  threshold_years: float = DEFAULT_TAU_THRESHOLD, n_pairs: int = 1_000_000,
                  rng: SeedLike = None) -> ErgmParams:
    """Pencarian akar bersarang: eta2 (luar) untuk tau, eta1 (dalam) untuk rata-rata derajat.

    Ekspektasi dihitung secara Monte Carlo atas ``n_pairs`` pasangan usia yang
    diambil dari ``age_sample``. Braket eta2 diperlebar bertahap dari 0 ke arah
    negatif sampai tau target terlampaui atau batas kotak [-20, 0] tercapai.
    """
    if target_tau < 1:
        raise ConfigError(f"target_tau harus >= 1, diberikan {target_tau}")
    if target_mean_degree <= 0:
        raise ConfigError(f"target_mean_degree harus positif, diberikan {target_mean_degree}")
    pairs = _AgePairs(age_sample, n_pairs, threshold_years, make_rng(rng))
    lo, hi = SEARCH_BOX

    def eta1_for(eta2: float) -> float:
        return _solve(lambda e1: pairs.mean_degree(ErgmParams(e1, eta2)), target_mean_degree, lo, hi)

    def tau_at(eta2: float) -> float:
        return pairs.tau(ErgmParams(eta1_for(eta2), eta2))

    if target_tau == 1.0:
        params = ErgmParams(eta1_for(0.0), 0.0)
    else:
        inner, outer = 0.0, -0.05
        while tau_at(outer) < target_tau:
            if outer <= lo:
                raise CalibrationError(f"Tau {target_tau} tidak tercapai dalam kotak pencarian")
            inner, outer = outer, max(2.0 * outer, lo)
        # tau naik ketika eta2 turun, jadi akar dicari pada -eta2
        neg_eta2 = _solve(lambda v: tau_at(-v), target_tau, -inner, -outer, xtol=1e-8)
        params = ErgmParams(eta1_for(-neg_eta2), -neg_eta2)

    achieved_degree = pairs.mean_degree(params)
    achieved_tau = pairs.tau(params)
    if abs(achieved_degree - target_mean_degree) > 0.01 * target_mean_degree \
            or abs(achieved_tau - target_tau) > 0.01 * target_tau:
        raise CalibrationError(
            "Kalibrasi tidak mencapai toleransi 1%",
            {"tau": achieved_tau, "mean_degree": achieved_degree},
        )
    logger.info(
        f"Kalibrasi eta=({params.eta1:.3f}, {params.eta2:.3f}) -> tau={achieved_tau:.3f}, "
        f"derajat={achieved_degree:.2f}"
    )
    return params
