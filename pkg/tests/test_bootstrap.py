"""Tests - Bootstrap: interval normal, generator replikasi, dan orkestrasi run_bootstrap."""

import math

import numpy as np

from rds_core.bootstrap import (
    BootstrapConfig,
    BootstrapMethod,
    dr_transition_matrix,
    lu_transition_matrix,
    nb_fixed_replicate,
    nb_replicate,
    normal_ci,
    replicate_estimates,
    run_bootstrap,
    salganik_replicate,
)
from rds_core.errors import ConfigError, VarianceError
from rds_core.estimators import EstimatorSuite
from tests.helpers import four_member_sample, simulated_sample, toy_sample


def test_normal_ci_reference_values():
    ci = normal_ci([0.4, 0.5, 0.6], 0.5)
    assert abs(ci.se - 0.1) < 1e-12
    assert abs(ci.lower - 0.304) < 1e-3 and abs(ci.upper - 0.696) < 1e-3
    assert abs((ci.upper - 0.5) / ci.se - 1.959964) < 1e-6
    assert not ci.clamped
    return "Normal CI OK"


def test_normal_ci_clamps_and_drops_undefined():
    ci = normal_ci([0.0, 0.2, None, 0.1], 0.05)
    assert ci.lower == 0.0 and ci.clamped
    try:
        normal_ci([0.3, None], 0.3)
    except VarianceError:
        return "CI clamp OK"
    raise AssertionError("Satu replikasi terdefinisi seharusnya gagal")


def test_lu_and_dr_transition_matrices():
    sample = four_member_sample()
    lu_matrix = lu_transition_matrix(sample)
    assert np.allclose(lu_matrix, [[2.0 / 3.0, 1.0 / 3.0], [1.0, 0.0]])
    dr_matrix = dr_transition_matrix(sample, 2.0)
    assert np.allclose(dr_matrix, [[0.5, 0.5], [1.0, 0.0]])
    assert np.allclose(dr_transition_matrix(sample, 1.0)[0], [4.0 / 6.0, 2.0 / 6.0])
    return "Transition matrices OK"


def test_salganik_replicate_is_a_chain():
    sample = simulated_sample(seed=2)
    replicate = salganik_replicate(sample, np.random.default_rng(1))
    assert replicate.size == sample.n
    assert replicate.recruiter[0] == -1
    assert np.array_equal(replicate.recruiter[1:], np.arange(sample.n - 1))
    replica = replicate.as_sample(sample)
    assert replica.n == sample.n
    return "Salganik chain OK"


def test_nb_replicates():
    sample = simulated_sample(seed=3)
    rng = np.random.default_rng(4)
    recruiters = np.unique(sample.recruitment_pairs()[0])
    loose = nb_replicate(sample, rng)
    assert int(np.count_nonzero(loose.recruiter < 0)) == recruiters.size
    for _ in range(20):
        fixed = nb_fixed_replicate(sample, rng)
        assert fixed.size == sample.n
        heads = np.flatnonzero(fixed.recruiter < 0)
        counts = np.bincount(fixed.recruiter[fixed.recruiter >= 0], minlength=fixed.size)
        assert np.all(counts[heads] >= 1)
    return "NB replicates OK"


class _RecordingRng:
    """Meneruskan ke Generator dan mencatat ukuran setiap panggilan integers."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.sizes = []

    def integers(self, high, size=None):
        self.sizes.append(size)
        return self.rng.integers(high, size=size)


def test_nb_fixed_initial_draw_and_many_replicates():
    sample = simulated_sample(seed=3)
    recorder = _RecordingRng(9)
    fixed = nb_fixed_replicate(sample, recorder)
    assert recorder.sizes[0] == math.ceil(sample.n / (1 + sample.coupons))
    assert fixed.size == sample.n
    rng = np.random.default_rng(10)
    sizes = {nb_fixed_replicate(sample, rng).size for _ in range(200)}
    assert sizes == {sample.n}
    return "NB fixed draw OK"


def test_run_bootstrap_reports_intervals():
    sample = simulated_sample(seed=5)
    config = BootstrapConfig(replicates=20, rng_seed=3)
    estimators = ["vh", "lu", "dr_ii", "mdr_ego"]
    summary = run_bootstrap(sample, config, EstimatorSuite(), estimators)
    refit_failures = summary.reports["mdr_ego"].refit_failures
    for name in estimators:
        report = summary.reports[name]
        assert report.replicates == 20
        assert report.bootstrap_method == config.method_for(name).value
        if report.undefined_replicates <= 18:
            assert report.se is not None and report.se >= 0.0
            assert 0.0 <= report.ci_lower <= report.ci_upper <= 1.0
    assert summary.reports["mdr_ego"].bootstrap_method == "nb-fixed"
    assert len(summary.replicate_fits) >= 20 - refit_failures
    distinct = {tuple(np.round(fit.beta_hat, 8)) for fit in summary.replicate_fits}
    assert len(distinct) > 1
    return "Bootstrap run OK"


def test_constant_outcome_has_zero_bootstrap_variance():
    sample = toy_sample(z=[0, 0, 0, 0], degree=[2, 2, 2, 2], recruiter=[-1, 0, 0, 1],
                        alter_z=[[0, 0], [0, 0], [0, 0], [0, 0]])
    for method in (BootstrapMethod.SALGANIK, BootstrapMethod.NB):
        config = BootstrapConfig(method=method, replicates=30, rng_seed=2)
        report = run_bootstrap(sample, config, EstimatorSuite(), ["vh"]).reports["vh"]
        assert report.estimate == 0.0
        assert report.se == 0.0
        assert report.ci_lower == report.ci_upper == 0.0
    return "Constant outcome OK"


def test_bootstrap_is_deterministic_across_threads():
    sample = simulated_sample(seed=6)
    single = replicate_estimates(sample, BootstrapMethod.LU, "lu", 15, rng_seed=8)
    again = replicate_estimates(sample, BootstrapMethod.LU, "lu", 15, rng_seed=8)
    assert single == again
    config = BootstrapConfig(method=BootstrapMethod.SALGANIK, replicates=15, rng_seed=8, threads=3)
    threaded = run_bootstrap(sample, config, EstimatorSuite(), ["vh"]).replicate_values["vh"]
    serial = run_bootstrap(sample, BootstrapConfig(method=BootstrapMethod.SALGANIK, replicates=15, rng_seed=8),
                           EstimatorSuite(), ["vh"]).replicate_values["vh"]
    assert threaded == serial
    return "Bootstrap determinism OK"


def test_bootstrap_config_validation():
    for kwargs in ({"replicates": 1}, {"alpha": 1.5}):
        try:
            BootstrapConfig(**kwargs)
        except ConfigError:
            continue
        raise AssertionError(f"Konfigurasi tidak valid diterima: {kwargs}")
    config = BootstrapConfig.from_config({"bootstrap": {"replicates": 50, "methods": {"vh": "nb"}}}, rng_seed=4)
    assert config.replicates == 50 and config.rng_seed == 4
    assert config.method_for("vh") == BootstrapMethod.NB
    assert config.method_for("lu") == BootstrapMethod.LU
    return "Bootstrap config OK"
