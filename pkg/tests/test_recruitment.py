"""Tests - Recruitment: probabilitas transisi, distribusi stasioner, reduksi DR, dan phi MDR."""

import math
import os
import tempfile

import numpy as np

from rds_core.errors import ConfigError, DataError
from rds_core.population import Population
from rds_core.recruitment import (
    CovariateSpec,
    DRModel,
    MDRModel,
    RandomModel,
    TransitionKernel,
    load_custom_table,
    load_model,
    pair_ratio,
    phi_i,
    phi_mdr,
    stationary,
    transition_matrix,
    transition_row,
)
from tests.helpers import high_mdr_model, ring_population


def _normalized(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values / values.sum()


def test_phi_i_worked_example():
    assert abs(phi_i([0.6, 0.3, 0.1]) - 3.6667) < 1e-4
    assert phi_i([1.0]) == 1.0
    assert abs(phi_i([0.25, 0.25, 0.25, 0.25]) - 1.0) < 1e-12
    return "phi_i OK"


def test_pair_ratio_matches_exponential_contrast():
    pop = Population.from_edges(3, [(0, 2), (1, 2)], [25, 35, 30], [0, 1, 0])
    model = MDRModel([CovariateSpec.node("z")], [1.2])
    ratio = pair_ratio(pop, model, 2, 1, 0)
    assert abs(ratio - 3.3201) < 1e-3
    row = transition_row(pop, model, 2)
    assert abs(row[1] / row[0] - math.exp(1.2)) < 1e-12
    return "Pair ratio OK"


def test_transition_rows_sum_to_one_and_stall():
    pop = ring_population()
    model = high_mdr_model()
    for i in range(pop.n):
        row = transition_row(pop, model, i)
        assert abs(sum(row.values()) - 1.0) < 1e-12
        assert set(row) == set(pop.neighbors(i).tolist())
    assert transition_row(pop, model, 0, exclude=pop.neighbors(0).tolist()) == {}
    kernel = TransitionKernel(pop, model)
    partial = kernel.row(0, exclude=[int(pop.neighbors(0)[0])])
    assert abs(sum(partial.values()) - 1.0) < 1e-12
    return "Transition rows OK"


def test_stationary_distribution_is_invariant():
    pop = ring_population(n=21, chords=18, seed=9)
    model = high_mdr_model()
    pi = stationary(pop, model).probabilities
    matrix = transition_matrix(pop, model)
    assert np.max(np.abs(pi @ matrix - pi)) < 1e-12
    assert abs(pi.sum() - 1.0) < 1e-12
    return "Stationary invariance OK"


def test_stationary_matches_power_iteration():
    pop = ring_population(n=15, chords=12, seed=2)
    model = high_mdr_model()
    matrix = transition_matrix(pop, model)
    state = np.full(pop.n, 1.0 / pop.n)
    for _ in range(20000):
        state = state @ matrix
    pi = stationary(pop, model).probabilities
    assert np.max(np.abs(state - pi)) < 1e-10
    return "Power iteration OK"


def test_dr_reduction_weights():
    pop = ring_population(n=31, chords=30, seed=6)
    d1 = pop.group_degree_vector("z", 1).astype(float)
    d0 = pop.group_degree_vector("z", 0).astype(float)
    for phi in (0.5, 1.0, 2.0, 5.0):
        expected = _normalized(phi ** pop.infection * (phi * d1 + d0))
        got = stationary(pop, DRModel("z", phi)).probabilities
        assert np.max(np.abs(got / expected - 1.0)) < 1e-12
    return "DR reduction OK"


def test_random_model_stationary_is_degree_proportional():
    pop = ring_population()
    got = stationary(pop, RandomModel()).probabilities
    assert np.allclose(got, _normalized(pop.degrees), rtol=0, atol=1e-14)
    assert abs(phi_mdr(pop, RandomModel()) - 1.0) < 1e-12
    return "Random model OK"


def test_phi_mdr_grows_with_beta():
    pop = ring_population(n=31, chords=40, seed=1)
    weak = phi_mdr(pop, DRModel("z", 1.5))
    strong = phi_mdr(pop, DRModel("z", 4.0))
    assert 1.0 <= weak < strong
    return f"phi_mdr OK ({weak:.3f} < {strong:.3f})"


def test_mdr_model_requires_node_covariates_first():
    try:
        MDRModel([CovariateSpec.abs_difference("age_diff"), CovariateSpec.node("z")], [0.1, 0.2])
    except ConfigError:
        pass
    else:
        raise AssertionError("Urutan kovariat tidak divalidasi")
    try:
        MDRModel([CovariateSpec.node("z")], [0.1, 0.2])
    except ConfigError:
        pass
    else:
        raise AssertionError("Panjang beta tidak divalidasi")
    return "Model validation OK"


def test_isolated_node_has_no_stationary_weight():
    pop = Population.from_edges(3, [(0, 1)], [20, 30, 40], [0, 1, 0])
    try:
        stationary(pop, RandomModel())
    except DataError:
        return "Isolated node OK"
    raise AssertionError("Node terisolasi tidak ditolak")


def test_custom_table_covariate():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "table.csv")
        with open(path, "w") as f:
            f.write("src,dst,value\n0,1,2.0\n1,0,2.0\n1,2,0.5\n")
        table = load_custom_table(path)
        assert table == {(0, 1): 2.0, (1, 2): 0.5}
        with open(path, "w") as f:
            f.write("src,dst,value\n0,1,2.0\n1,0,3.0\n")
        try:
            load_custom_table(path)
        except DataError:
            pass
        else:
            raise AssertionError("Tabel asimetris diterima")

    pop = Population.from_edges(3, [(0, 1), (1, 2)], [20, 30, 40], [0, 1, 0])
    spec = CovariateSpec.custom_table("closeness", {(0, 1): 2.0, (1, 2): 0.5})
    row = transition_row(pop, MDRModel([spec], [1.0]), 1)
    assert abs(row[0] / row[2] - math.exp(1.5)) < 1e-12
    return "Custom table OK"


def test_model_json_roundtrip():
    model = high_mdr_model()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        loaded = load_model(path)
    assert loaded.names == model.names
    assert np.array_equal(loaded.beta, model.beta)
    assert loaded.k1 == 3
    return "Model JSON OK"
