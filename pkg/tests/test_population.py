"""Tests - Population: konstruksi, validasi, dan besaran tingkat populasi."""

import numpy as np

from rds_core.errors import AttributeMissingError, DataError, NodeIndexError
from rds_core.population import Population, population_mixing
from tests.helpers import ring_population


def _triangle_with_tail() -> Population:
    # 0-1-2 segitiga, 2-3 ekor
    return Population.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)], [20, 30, 40, 50], [0, 1, 1, 0])


def test_population_neighbors_and_degrees():
    pop = _triangle_with_tail()
    assert pop.neighbors(2).tolist() == [0, 1, 3]
    assert pop.degrees.tolist() == [2, 2, 3, 1]
    assert pop.n_edges == 4
    assert pop.edge_list().tolist() == [[0, 1], [0, 2], [1, 2], [2, 3]]
    return "Population neighbors OK"


def test_population_rejects_invalid_edges():
    for edges in ([(0, 0)], [(0, 1), (1, 0)], [(0, 5)]):
        try:
            Population.from_edges(3, edges, [20, 30, 40], [0, 1, 0])
        except DataError:
            continue
        raise AssertionError(f"Edge tidak valid diterima: {edges}")
    try:
        Population.from_adjacency(np.array([[0, 1], [0, 0]]), [20, 30], [0, 1])
    except DataError:
        pass
    else:
        raise AssertionError("Matriks asimetris diterima")
    return "Population validation OK"


def test_population_node_index_and_attributes():
    pop = _triangle_with_tail()
    try:
        pop.neighbors(4)
    except NodeIndexError:
        pass
    else:
        raise AssertionError("Indeks di luar rentang tidak ditolak")
    try:
        pop.attribute("income")
    except AttributeMissingError:
        pass
    else:
        raise AssertionError("Atribut tidak dikenal tidak ditolak")
    assert pop.attribute_names == ["age", "z"]
    return "Population attributes OK"


def test_group_degrees_sum_to_degree():
    pop = ring_population()
    for i in range(pop.n):
        counts = pop.group_degrees(i, "z")
        assert counts.total == pop.degree(i)
    d1 = pop.group_degree_vector("z", 1)
    d0 = pop.group_degree_vector("z", 0)
    assert np.array_equal(d0 + d1, pop.degrees)
    return "Group degrees OK"


def test_cross_group_ties_are_symmetric():
    pop = ring_population(n=21, chords=15, seed=8)
    t01, t10 = pop.cross_group_ties()
    assert t01 == t10
    return f"Cross ties OK ({t01})"


def test_population_mixing_reproduces_prevalence():
    pop = ring_population(n=25, chords=20, seed=4)
    mixing = population_mixing(pop)
    mu = mixing["c01"] * mixing["d0"] / (mixing["c01"] * mixing["d0"] + mixing["c10"] * mixing["d1"])
    assert abs(mu - pop.true_prevalence()) < 1e-12
    return "Population mixing OK"


def test_population_with_attribute_and_dense_view():
    pop = _triangle_with_tail().with_attribute("region", [0, 0, 1, 1])
    assert pop.attribute_names == ["age", "z", "region"]
    assert pop.group_degrees(2, "region").counts == {0: 2, 1: 1}
    dense = pop.dense()
    assert np.array_equal(dense, dense.T) and dense.sum() == 8
    assert pop.n_components() == 1
    return "Population extras OK"
