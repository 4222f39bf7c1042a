"""Tests - Inference: log-likelihood rekrutmen, gradien analitik, dan estimasi ML phi/beta."""

import math

import numpy as np

from rds_core.errors import DataError
from rds_core.inference import (
    ChoiceData,
    FitResult,
    coefficient_intervals,
    fit_dr,
    fit_mdr,
    log_likelihood,
    log_likelihood_gradient,
)
from rds_core.recruitment import SCENARIO_COVARIATES, CovariateSpec, DRModel
from tests.helpers import four_member_sample, random_population, simulated_sample, toy_sample


def _single_choice_sample():
    # seed z=0 melaporkan alter z=[1, 0] dan merekrut anggota z=1
    return toy_sample(z=[0, 1], degree=[2, 1], recruiter=[-1, 0], alter_z=[[1, 0], [0]])


def test_log_likelihood_hand_example():
    sample = _single_choice_sample()
    spec = [CovariateSpec.node("z")]
    assert abs(log_likelihood(sample, spec, [math.log(2.0)]) - math.log(2.0 / 3.0)) < 1e-12
    assert abs(log_likelihood_gradient(sample, spec, [math.log(2.0)])[0] - 1.0 / 3.0) < 1e-12
    assert abs(log_likelihood(sample, spec, [0.0]) - math.log(0.5)) < 1e-12
    return "Likelihood hand example OK"


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    h = 1e-6
    for seed in range(5):
        sample = simulated_sample(seed=seed, n_target=80)
        choices = ChoiceData.from_sample(sample, SCENARIO_COVARIATES)
        beta = rng.normal(0.0, 0.05, size=4)
        analytic = choices.gradient(beta)
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            numeric = (choices.log_likelihood(beta + step) - choices.log_likelihood(beta - step)) / (2 * h)
            assert abs(analytic[k] - numeric) / max(abs(analytic[k]), 1.0) < 1e-6
    return "Gradient check OK"


def test_fit_dr_matches_grid_search():
    sample = simulated_sample(seed=3, model=DRModel("z", 2.0))
    fit = fit_dr(sample)
    choices = ChoiceData.from_sample(sample, [CovariateSpec.node("z")])
    grid = np.arange(-3.0, 3.0 + 1e-9, 0.01)
    values = [choices.log_likelihood(np.array([b])) for b in grid]
    best = float(grid[int(np.argmax(values))])
    assert fit.converged
    assert abs(fit.beta_hat[0] - best) <= 0.02
    assert abs(fit.phi - math.exp(fit.beta_hat[0])) < 1e-12
    assert "phi_hat" in fit.to_dict()
    return f"DR grid OK (phi={fit.phi:.3f})"


def test_fit_dr_closed_form_recovery():
    # empat rekrut dari satu seed berlaporan [1, 0]: tiga z=1 dan satu z=0, maka phi_hat = 3/1
    sample = toy_sample(z=[0, 1, 1, 1, 0], degree=[2, 1, 1, 1, 1], recruiter=[-1, 0, 0, 0, 0],
                        alter_z=[[1, 0], [0], [0], [0], [1]])
    fit = fit_dr(sample)
    assert fit.converged
    assert abs(fit.phi - 3.0) < 1e-4
    return f"DR closed form OK (phi={fit.phi:.5f})"


def test_fit_dr_orders_recruitment_bias():
    pop = random_population(n=1000, mean_degree=10.0, seed=13)
    neutral, biased = [], []
    for seed in range(8):
        neutral.append(fit_dr(simulated_sample(seed=seed, n_target=80, model=DRModel("z", 1.0), pop=pop)).phi)
        biased.append(fit_dr(simulated_sample(seed=seed, n_target=80, model=DRModel("z", 4.0), pop=pop)).phi)
    assert float(np.median(biased)) > float(np.median(neutral))
    assert float(np.median(biased)) > 1.5
    return f"DR ordering OK (median phi {np.median(neutral):.2f} vs {np.median(biased):.2f})"


def test_fit_mdr_is_stationary_point():
    sample = simulated_sample(seed=4)
    fit = fit_mdr(sample, SCENARIO_COVARIATES)
    assert fit.converged
    assert fit.gradient_norm < 1e-3
    assert fit.n_recruits == sample.n_recruits
    assert fit.names == ["age", "z", "age_z", "age_diff"]
    return f"MDR fit OK (iterations={fit.iterations})"


def test_standardized_fit_agrees():
    sample = simulated_sample(seed=6)
    plain = fit_mdr(sample, SCENARIO_COVARIATES)
    scaled = fit_mdr(sample, SCENARIO_COVARIATES, standardize=True)
    assert np.max(np.abs(plain.beta_hat - scaled.beta_hat)) < 1e-4
    assert abs(plain.log_lik - scaled.log_lik) < 1e-6
    return "Standardized fit OK"


def test_fit_requires_recruits():
    sample = toy_sample(z=[0, 1], degree=[1, 1], recruiter=[-1, -1], alter_z=[[1], [0]])
    try:
        fit_mdr(sample, [CovariateSpec.node("z")])
    except DataError:
        return "No recruits OK"
    raise AssertionError("Sampel tanpa rekrut tidak ditolak")


def test_identifiability_warning_for_constant_covariate():
    fit = fit_mdr(four_member_sample(), [CovariateSpec.node("age"), CovariateSpec.node("z")])
    assert len(fit.identifiability_warnings) == 1
    assert "age" in fit.identifiability_warnings[0]
    assert abs(fit.beta_hat[1]) < 1e-4
    return "Identifiability OK"


def test_separation_warning():
    fit = fit_mdr(_single_choice_sample(), [CovariateSpec.node("z")])
    assert fit.beta_hat[0] > 15
    assert any("separasi" in message for message in fit.warnings)
    return "Separation OK"


def test_dr_requires_binary_attribute():
    try:
        fit_dr(four_member_sample(), attr="age")
    except DataError:
        return "Binary check OK"
    raise AssertionError("Atribut non-biner diterima")


def test_coefficient_intervals():
    def fit(beta):
        return FitResult(beta_hat=np.array([beta]), log_lik=0.0, converged=True, iterations=1,
                         gradient_norm=0.0, names=["z"])

    rows = coefficient_intervals([fit(0.4), fit(0.5), fit(0.6)], fit(0.5))
    assert abs(rows[0]["se"] - 0.1) < 1e-12
    assert abs(rows[0]["lower"] - (0.5 - 1.959964 * 0.1)) < 1e-6
    assert rows[0]["replicates"] == 3
    return "Coefficient intervals OK"
