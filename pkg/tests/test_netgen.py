"""Tests - Netgen: pembangkitan populasi, rasio homofili tau, dan kalibrasi eta."""

import math
import os
import tempfile

import numpy as np

from rds_core import netgen
from rds_core.errors import ConfigError, GenerationError, UndefinedRatioError
from rds_core.netgen import (
    HOMOPHILY_LEVELS,
    ErgmParams,
    PopulationRecipe,
    calibrate_eta,
    draw_population,
    estimate_tau,
)
from rds_core.population import Population


def test_draw_population_null_homophily():
    recipe = PopulationRecipe.for_level("none", rng_seed=21)
    pop = draw_population(recipe)
    assert pop.n == 1000
    assert pop.isolated_nodes().size == 0
    assert abs(pop.degrees.mean() - 12.0) < 1.5
    assert 0.9 <= estimate_tau(pop) <= 1.1
    return f"Null population OK (mean degree {pop.degrees.mean():.2f})"


def test_draw_population_is_deterministic():
    recipe = PopulationRecipe(n=400, ergm=ErgmParams(-3.0, 0.0), rng_seed=7)
    first, second = draw_population(recipe), draw_population(recipe)
    assert np.array_equal(first.indices, second.indices)
    assert np.array_equal(first.ages, second.ages)
    assert np.array_equal(first.infection, second.infection)
    return "Deterministic generation OK"


def test_draw_population_gives_up_on_sparse_networks():
    recipe = PopulationRecipe(n=50, ergm=HOMOPHILY_LEVELS["none"], max_retries=3, rng_seed=1)
    try:
        draw_population(recipe)
    except GenerationError as e:
        assert e.details["attempts"] == 3
        return "Generation retries OK"
    raise AssertionError("Jaringan jarang seharusnya gagal dibangkitkan")


def test_estimate_tau_hand_example():
    pop = Population.from_edges(4, [(0, 1), (2, 3), (0, 2)], [20, 22, 40, 42], [0, 0, 1, 1])
    assert abs(estimate_tau(pop) - 4.0) < 1e-12
    flat = Population.from_edges(3, [(0, 1), (1, 2)], [30, 30, 30], [0, 1, 0])
    try:
        estimate_tau(flat)
    except UndefinedRatioError:
        pass
    else:
        raise AssertionError("Tau tanpa dyad jauh harus tidak terdefinisi")
    only_close = Population.from_edges(4, [(0, 1), (2, 3)], [20, 22, 40, 42], [0, 0, 1, 1])
    assert estimate_tau(only_close) == math.inf
    return "Tau hand example OK"


def test_calibrate_eta_null_target():
    ages = np.random.default_rng(3).gamma(26.0, 1.0, size=1000)
    params = calibrate_eta(1.0, 12.0, ages, n_pairs=100_000, rng=4)
    assert params.eta2 == 0.0
    assert abs(params.eta1 - (-4.41)) < 0.01
    return f"Null calibration OK ({params.eta1:.4f})"


def test_calibrate_eta_homophily_target():
    ages = np.random.default_rng(3).gamma(26.0, 1.0, size=1000)
    params = calibrate_eta(3.2, 12.0, ages, n_pairs=100_000, rng=4)
    assert params.eta2 < 0.0
    assert params.eta1 > -4.41
    return f"Homophily calibration OK ({params.eta1:.3f}, {params.eta2:.3f})"


def test_calibrate_eta_rejects_invalid_targets():
    ages = np.linspace(18, 60, 200)
    for tau, degree in ((0.5, 12.0), (2.0, -1.0)):
        try:
            calibrate_eta(tau, degree, ages, n_pairs=1000)
        except ConfigError:
            continue
        raise AssertionError(f"Target tidak valid diterima: tau={tau}, degree={degree}")
    return "Calibration validation OK"


def test_recipe_validation_and_roundtrip():
    try:
        PopulationRecipe(n=1)
    except ConfigError:
        pass
    else:
        raise AssertionError("Ukuran populasi 1 diterima")
    recipe = PopulationRecipe.for_level("high", n=500, rng_seed=9)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "recipe.json")
        recipe.save(path)
        loaded = PopulationRecipe.load(path)
    assert loaded == recipe
    assert loaded.ergm == HOMOPHILY_LEVELS["high"]
    return "Recipe OK"


def test_high_homophily_tau_band():
    taus, prevalences = [], []
    for seed in range(15):
        pop = draw_population(PopulationRecipe.for_level("high", rng_seed=seed))
        taus.append(estimate_tau(pop))
        prevalences.append(pop.true_prevalence())
    assert 4.3 <= float(np.mean(taus)) <= 5.9
    assert 0.14 <= float(np.mean(prevalences)) <= 0.19
    return f"High homophily OK (tau={np.mean(taus):.2f})"


def test_draw_population_redraws_ages_on_retry():
    seen_ages = []
    real_draw_ties = netgen._draw_ties

    def isolating_first_attempt(ages, ergm, rng):
        seen_ages.append(ages.copy())
        lo, hi = real_draw_ties(ages, ergm, rng)
        if len(seen_ages) == 1:
            return lo[:0], hi[:0]
        return lo, hi

    netgen._draw_ties = isolating_first_attempt
    try:
        pop = draw_population(PopulationRecipe(n=200, ergm=ErgmParams(-1.0, 0.0), rng_seed=11))
    finally:
        netgen._draw_ties = real_draw_ties
    assert len(seen_ages) == 2
    assert not np.array_equal(seen_ages[0], seen_ages[1])
    assert np.array_equal(pop.ages, seen_ages[1])
    return "Retry redraws ages OK"
