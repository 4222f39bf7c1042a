"""Scenario - Orkestrasi studi simulasi: jaringan x sampel per sel homofili x MDR, agregasi bias/SD/RMSE/coverage."""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from monitoring.monitor import RunMetrics
from rds_core.bootstrap import BootstrapConfig, run_bootstrap
from rds_core.errors import ConfigError, RDSError, ScenarioAbortError
from rds_core.estimators import ESTIMATORS, EstimatorSuite
from rds_core.netgen import HOMOPHILY_LEVELS, HOMOPHILY_TAU_TARGETS, PopulationRecipe, draw_population, estimate_tau
from rds_core.recruitment import (
    MDR_LEVELS,
    PHI_MDR_TARGETS,
    SCENARIO_COVARIATES,
    TransitionKernel,
    phi_mdr,
    scenario_model,
)
from rds_core.rng import seed_from, spawn_stream
from rds_core.sampler import SamplingDesign, run_rds

logger = logging.getLogger(__name__)

LEVELS = ("none", "moderate", "high")

# nomor skenario 1..9: baris homofili, kolom MDR
SCENARIOS = {
    1 + 3 * row + col: (homophily, mdr)
    for row, homophily in enumerate(LEVELS)
    for col, mdr in enumerate(LEVELS)
}

DEFAULT_SCENARIO_ESTIMATORS = ["vh", "dr_ii", "mdr_ii", "lu", "dr_ego", "mdr_ego"]


def scenario_number(homophily_level: str, mdr_level: str) -> int:
    return 1 + 3 * LEVELS.index(homophily_level) + LEVELS.index(mdr_level)


@dataclass
class ScenarioConfig:
    homophily_level: str = "none"
    mdr_level: str = "none"
    networks: int = 5
    samples_per_network: int = 40
    design: SamplingDesign = field(default_factory=SamplingDesign)
    estimators: list = field(default_factory=lambda: list(DEFAULT_SCENARIO_ESTIMATORS))
    bootstrap: Optional[BootstrapConfig] = None
    root_seed: int = 0
    population: PopulationRecipe = field(default_factory=PopulationRecipe)
    abort_failure_fraction: float = 0.2
    threads: int = 1

    def __post_init__(self):
        if self.homophily_level not in HOMOPHILY_LEVELS:
            raise ConfigError(f"Level homofili tidak dikenal: {self.homophily_level}")
        if self.mdr_level not in MDR_LEVELS:
            raise ConfigError(f"Level MDR tidak dikenal: {self.mdr_level}")
        if self.networks < 1 or self.samples_per_network < 1:
            raise ConfigError(
                "Jumlah jaringan dan sampel per jaringan minimal 1",
                {"networks": self.networks, "samples_per_network": self.samples_per_network},
            )
        unknown = [name for name in self.estimators if name not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"Estimator tidak dikenal: {', '.join(unknown)}")
        if isinstance(self.design, dict):
            self.design = SamplingDesign.from_dict(self.design)
        if isinstance(self.bootstrap, dict):
            self.bootstrap = BootstrapConfig(**self.bootstrap)
        if isinstance(self.population, dict):
            self.population = PopulationRecipe.from_dict(self.population)
        self.population = PopulationRecipe.from_dict(
            {**self.population.to_dict(), "ergm": HOMOPHILY_LEVELS[self.homophily_level].to_dict()}
        )

    @property
    def number(self) -> int:
        return scenario_number(self.homophily_level, self.mdr_level)

    @classmethod
    def for_scenario(cls, number: int, **overrides) -> "ScenarioConfig":
        if number not in SCENARIOS:
            raise ConfigError(f"Nomor skenario harus 1..9, diberikan {number}")
        homophily, mdr = SCENARIOS[number]
        return cls(homophily_level=homophily, mdr_level=mdr, **overrides)

    @classmethod
    def from_config(cls, config: dict, homophily_level: str, mdr_level: str, full_scale: bool = False,
                    root_seed: int = 0, with_bootstrap: bool = True, threads: int = 1) -> "ScenarioConfig":
        section = config.get("scenario", {})
        scale = section.get("full_scale" if full_scale else "desk_scale", {})
        netgen = config.get("netgen", {})
        population = PopulationRecipe(
            n=int(netgen.get("population_size", 1000)),
            age_shape=float(netgen.get("age_shape", 26.0)),
            age_rate=float(netgen.get("age_rate", 1.0)),
            logit_intercept=float(netgen.get("logit_intercept", -4.0)),
            logit_slope=float(netgen.get("logit_slope", 0.09)),
            max_retries=int(netgen.get("max_retries", 100)),
        )
        return cls(
            homophily_level=homophily_level,
            mdr_level=mdr_level,
            networks=int(scale.get("networks", 5)),
            samples_per_network=int(scale.get("samples_per_network", 40)),
            design=SamplingDesign.from_dict(config.get("sampling", {})),
            estimators=list(section.get("estimators", DEFAULT_SCENARIO_ESTIMATORS)),
            bootstrap=BootstrapConfig.from_config(config) if with_bootstrap else None,
            root_seed=root_seed,
            population=population,
            abort_failure_fraction=float(section.get("abort_failure_fraction", 0.2)),
            threads=threads,
        )

    def to_dict(self) -> dict:
        return {
            "homophily_level": self.homophily_level,
            "mdr_level": self.mdr_level,
            "networks": self.networks,
            "samples_per_network": self.samples_per_network,
            "design": self.design.to_dict(),
            "estimators": list(self.estimators),
            "bootstrap": None if self.bootstrap is None else self.bootstrap.to_dict(),
            "root_seed": self.root_seed,
            "population": self.population.to_dict(),
            "abort_failure_fraction": self.abort_failure_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        fields = dict(data)
        if fields.get("bootstrap"):
            boot = dict(fields["bootstrap"])
            boot.pop("rng_seed", None)
            fields["bootstrap"] = BootstrapConfig(**boot)
        if "scenario" in fields:
            homophily, mdr = SCENARIOS[int(fields.pop("scenario"))]
            fields.setdefault("homophily_level", homophily)
            fields.setdefault("mdr_level", mdr)
        return cls(**fields)

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        try:
            with open(path, "r") as f:
                return cls.from_dict(json.load(f))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Konfigurasi skenario tidak valid: {e}", {"path": path})


@dataclass
class UnitOutcome:
    """Hasil satu pasangan (jaringan, sampel)."""

    network: int
    sample: int
    estimates: dict = field(default_factory=dict)
    intervals: dict = field(default_factory=dict)
    failed: bool = False
    error: Optional[str] = None
    counters: dict = field(default_factory=dict)


@dataclass
class NetworkOutcome:
    network: int
    true_prevalence: float
    diagnostics: dict
    units: list


@dataclass
class EstimatorStats:
    bias: Optional[float]
    sd: Optional[float]
    rmse: Optional[float]
    coverage: Optional[float]
    undefined_rate: float
    defined: int

    def to_dict(self) -> dict:
        return {
            "bias": self.bias,
            "sd": self.sd,
            "rmse": self.rmse,
            "coverage": self.coverage,
            "undefined_rate": self.undefined_rate,
            "defined": self.defined,
        }


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    stats: dict
    traces: dict
    networks: list
    counters: dict

    @property
    def number(self) -> int:
        return self.config.number

    def squared_errors(self) -> dict:
        return {name: [None if e is None else e * e for e in errors] for name, errors in self.traces.items()}

    def to_dict(self) -> dict:
        return {
            "scenario": self.number,
            "config": self.config.to_dict(),
            "estimators": {name: s.to_dict() for name, s in self.stats.items()},
            "traces": self.traces,
            "networks": self.networks,
            "counters": self.counters,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _run_unit(config: ScenarioConfig, pop, kernel, model, suite: EstimatorSuite, k: int, s: int) -> UnitOutcome:
    outcome = UnitOutcome(network=k, sample=s)
    counters = {"undefined_replicates": 0, "refit_failures": 0}
    try:
        sample = run_rds(pop, model, config.design, spawn_stream(config.root_seed, 1, k, s), kernel=kernel)
        fits = suite.fit(sample, config.estimators)
        if config.bootstrap is not None:
            boot_config = BootstrapConfig(**{
                **config.bootstrap.__dict__,
                "rng_seed": seed_from(spawn_stream(config.root_seed, 2, k, s)),
                "threads": 1,
            })
            summary = run_bootstrap(sample, boot_config, suite, config.estimators, fits)
            for name, report in summary.reports.items():
                outcome.estimates[name] = report.estimate
                if report.ci_lower is not None:
                    outcome.intervals[name] = (report.ci_lower, report.ci_upper)
                counters["undefined_replicates"] += report.undefined_replicates
            counters["refit_failures"] = max((r.refit_failures for r in summary.reports.values()), default=0)
        else:
            outcome.estimates = suite.evaluate(sample, config.estimators, fits)
    except RDSError as e:
        outcome.failed = True
        outcome.error = f"{type(e).__name__}: {e.message}"
        logger.debug(f"Unit ({k}, {s}) gagal: {outcome.error}")
    outcome.counters = counters
    return outcome


def run_network(config: ScenarioConfig, k: int) -> NetworkOutcome:
    """Bangkitkan jaringan ke-k lalu tarik semua sampelnya secara berurutan."""
    pop = draw_population(config.population, spawn_stream(config.root_seed, 0, k))
    model = scenario_model(config.mdr_level)
    kernel = TransitionKernel(pop, model)
    suite = EstimatorSuite(covariates=list(SCENARIO_COVARIATES))
    t01, t10 = pop.cross_group_ties()
    try:
        tau = estimate_tau(pop)
    except RDSError:
        tau = None
    diagnostics = {
        "network": k,
        "true_prevalence": pop.true_prevalence(),
        "mean_degree": float(pop.degrees.mean()),
        "tau": tau,
        "phi_mdr": phi_mdr(pop, model, kernel),
        "t01": t01,
        "t10": t10,
    }
    units = [_run_unit(config, pop, kernel, model, suite, k, s) for s in range(config.samples_per_network)]
    logger.info(f"Jaringan {k} selesai: mu={diagnostics['true_prevalence']:.4f}, tau={tau}, "
                f"phi_mdr={diagnostics['phi_mdr']:.3f}")
    return NetworkOutcome(network=k, true_prevalence=pop.true_prevalence(), diagnostics=diagnostics, units=units)


def _aggregate(values: list[Optional[float]], truths: list[float]) -> tuple:
    errors = [None if v is None else v - t for v, t in zip(values, truths)]
    defined = np.array([e for e in errors if e is not None], dtype=float)
    if defined.size == 0:
        return errors, None, None, None
    bias = math.fsum(defined) / defined.size
    sd = math.sqrt(math.fsum((defined - bias) ** 2) / defined.size)
    rmse = math.sqrt(math.fsum(defined ** 2) / defined.size)
    return errors, bias, sd, rmse


def run_scenario(config: ScenarioConfig, metrics: Optional[RunMetrics] = None) -> ScenarioResult:
    """Jalankan satu sel; error per unit diagregasi, sel dibatalkan bila kegagalan > batas."""
    metrics = metrics or RunMetrics()
    cell = RunMetrics()
    logger.info(
        f"Skenario {config.number} ({config.homophily_level}, {config.mdr_level}): "
        f"{config.networks} jaringan x {config.samples_per_network} sampel"
    )
    with metrics.timer(f"scenario_{config.number}"):
        if config.threads > 1:
            with ProcessPoolExecutor(max_workers=config.threads) as pool:
                outcomes = list(pool.map(run_network, [config] * config.networks, range(config.networks)))
        else:
            outcomes = [run_network(config, k) for k in range(config.networks)]

    units = [(o.true_prevalence, u) for o in outcomes for u in o.units]
    failures = sum(1 for _, u in units if u.failed)
    cell.increment("failures", failures)
    for _, u in units:
        cell.merge(u.counters)
    metrics.merge(cell.get_all_counters())
    if failures > config.abort_failure_fraction * len(units):
        raise ScenarioAbortError(
            f"Sel skenario {config.number} dibatalkan: {failures} dari {len(units)} unit gagal",
            {"failures": failures, "units": len(units)},
        )
    if failures:
        logger.warning(f"{failures} unit gagal dalam skenario {config.number}")

    stats, traces = {}, {}
    valid = [(truth, u) for truth, u in units if not u.failed]
    truths = [truth for truth, _ in valid]
    for name in config.estimators:
        values = [u.estimates.get(name) for _, u in valid]
        errors, bias, sd, rmse = _aggregate(values, truths)
        undefined = sum(1 for v in values if v is None)
        cell.increment("undefined_estimates", undefined)
        metrics.increment("undefined_estimates", undefined)
        covered = [lo <= truth <= hi for truth, u in valid if name in u.intervals
                   for lo, hi in [u.intervals[name]]]
        stats[name] = EstimatorStats(
            bias=bias,
            sd=sd,
            rmse=rmse,
            coverage=(sum(covered) / len(covered)) if covered else None,
            undefined_rate=undefined / len(values) if values else 0.0,
            defined=len(values) - undefined,
        )
        traces[name] = errors

    metrics.log_timings()
    return ScenarioResult(
        config=config,
        stats=stats,
        traces=traces,
        networks=[o.diagnostics for o in outcomes],
        counters={"units": len(units), **cell.get_all_counters()},
    )


def scenario_targets(number: int) -> dict:
    homophily, mdr = SCENARIOS[number]
    return {"tau": HOMOPHILY_TAU_TARGETS[homophily], "phi_mdr": PHI_MDR_TARGETS[mdr]}
