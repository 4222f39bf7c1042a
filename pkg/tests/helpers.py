"""Helpers - Populasi dan sampel kecil bersama untuk pengujian."""

import numpy as np

from rds_core.population import Population
from rds_core.recruitment import MDR_LEVELS, MDRModel, SCENARIO_COVARIATES
from rds_core.sampler import EgoReport, RDSSample, SampleMode, SamplingDesign, run_rds


def toy_sample(z, degree, recruiter, alter_z, ages=None, alter_ages=None) -> RDSSample:
    """Sampel mode ingestion dengan laporan alter z (dan usia) yang ditentukan langsung."""
    n = len(z)
    ages = list(ages) if ages is not None else [30.0] * n
    wave = []
    for p, r in enumerate(recruiter):
        wave.append(0 if r < 0 else wave[r] + 1)
    reports = []
    for p in range(n):
        values = np.asarray(alter_z[p], dtype=np.int64)
        alter_age = alter_ages[p] if alter_ages is not None else [30.0] * len(values)
        reports.append(EgoReport(attrs={"z": values, "age": np.asarray(alter_age, dtype=float)}))
    return RDSSample(
        ids=list(range(100, 100 + n)),
        recruiter=recruiter,
        wave=wave,
        degree=degree,
        attributes={"z": np.asarray(z, dtype=np.int64), "age": np.asarray(ages, dtype=float)},
        ego_reports=reports,
        mode=SampleMode.INGESTION,
    )


def four_member_sample() -> RDSSample:
    """A(z=0) merekrut B(z=1) dan C(z=0); B merekrut D(z=0). Semua berderajat 2."""
    return toy_sample(
        z=[0, 1, 0, 0],
        degree=[2, 2, 2, 2],
        recruiter=[-1, 0, 0, 1],
        alter_z=[[1, 0], [0, 0], [0, 0], [1, 0]],
    )


def ring_population(n: int = 15, chords: int = 10, seed: int = 3) -> Population:
    """Cincin terhubung (n ganjil, aperiodik) ditambah tali acak."""
    rng = np.random.default_rng(seed)
    edges = {(i, (i + 1) % n) for i in range(n)}
    edges = {(min(a, b), max(a, b)) for a, b in edges}
    while len(edges) < n + chords:
        a, b = rng.choice(n, size=2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    ages = rng.uniform(18, 60, size=n)
    infection = (rng.random(n) < 0.4).astype(np.int64)
    infection[0], infection[1] = 0, 1
    return Population.from_edges(n, sorted(edges), ages, infection)


def random_population(n: int = 300, mean_degree: float = 8.0, seed: int = 11) -> Population:
    """Graf Erdos-Renyi dengan cincin penjamin keterhubungan; cepat untuk uji sampler."""
    rng = np.random.default_rng(seed)
    p = mean_degree / (n - 1)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    for i in range(n):
        j = (i + 1) % n
        upper[min(i, j), max(i, j)] = True
    lo, hi = np.nonzero(upper)
    ages = rng.gamma(26.0, 1.0, size=n)
    infection = (rng.random(n) < 0.3).astype(np.int64)
    return Population.from_pairs(n, lo, hi, ages, infection)


def high_mdr_model() -> MDRModel:
    return MDRModel(SCENARIO_COVARIATES, MDR_LEVELS["high"])


def simulated_sample(seed: int = 5, n_target: int = 120, model=None, pop=None) -> RDSSample:
    pop = pop or random_population()
    design = SamplingDesign(n_target=n_target, n_seeds=5, coupons=2)
    return run_rds(pop, model or high_mdr_model(), design, np.random.default_rng(seed))
