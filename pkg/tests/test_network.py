from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outageflow.labels import Mode
from outageflow.network import avoiding_fraction, avoiding_fractions, generate_watts_strogatz


def _gen(n, k, beta, seed=0):
    return generate_watts_strogatz(n, k, beta, np.random.default_rng(seed))


def _assert_simple_undirected(graph):
    for i in range(graph.n_nodes):
        nbrs = graph.neighbors(i)
        assert i not in nbrs
        assert np.all(np.diff(nbrs) > 0), "neighbour lists must be sorted and duplicate-free"
        for j in nbrs.tolist():
            assert i in graph.neighbors(j)


def test_zero_rewiring_gives_ring_lattice():
    graph = _gen(10, 4, 0.0)
    assert graph.n_edges == 20
    assert np.all(graph.degree == 4)
    assert graph.neighbors(0).tolist() == [1, 2, 8, 9]
    assert graph.adjacency[5] == [3, 4, 6, 7]


def test_desk_scale_graph_invariants():
    graph = _gen(1000, 8, 0.1, seed=1)
    assert graph.n_edges == 4000
    assert graph.degree.sum() == 2 * graph.n_edges
    _assert_simple_undirected(graph)
    assert (graph.matrix != graph.matrix.T).nnz == 0


def test_full_rewiring_keeps_edge_count_when_no_target_exists():
    graph = _gen(5, 4, 1.0)
    assert graph.n_edges == 10
    _assert_simple_undirected(graph)


@pytest.mark.parametrize("n, k", [(10, 3), (10, 10), (10, 12), (10, 0)])
def test_invalid_degree_is_rejected(n, k):
    with pytest.raises(ValueError):
        _gen(n, k, 0.1)


def test_invalid_beta_is_rejected():
    with pytest.raises(ValueError):
        _gen(10, 4, 1.5)


def test_generation_is_deterministic():
    a = _gen(300, 6, 0.2, seed=42)
    b = _gen(300, 6, 0.2, seed=42)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)


def test_lattice_clustering_and_rewired_clustering():
    lattice = nx.average_clustering(_gen(200, 6, 0.0).to_networkx())
    assert lattice == pytest.approx(3 * (6 - 2) / (4 * (6 - 1)))
    for seed in range(3):
        rewired = nx.average_clustering(_gen(200, 6, 1.0, seed=seed).to_networkx())
        assert rewired < lattice


def test_edge_frame_orders_endpoints():
    frame = _gen(50, 4, 0.3, seed=3).to_frame()
    assert list(frame.columns) == ["node_a", "node_b"]
    assert len(frame) == 100
    assert (frame["node_a"] < frame["node_b"]).all()
    assert not frame.duplicated().any()


def test_avoiding_fraction_cases():
    graph = _gen(10, 4, 0.0)
    modes = np.full(10, Mode.OK, dtype=np.int8)
    assert avoiding_fraction(graph, 0, modes) == 0.0
    modes[1] = Mode.AVOIDING
    modes[2] = Mode.FRUSTRATED
    assert avoiding_fraction(graph, 0, modes) == 0.25
    modes[:] = Mode.AVOIDING
    assert avoiding_fraction(graph, 0, modes) == 1.0


def test_vectorised_fractions_match_single_node_queries():
    graph = _gen(120, 6, 0.2, seed=5)
    modes = np.random.default_rng(9).integers(0, 3, 120).astype(np.int8)
    fractions = avoiding_fractions(graph, modes)
    expected = [avoiding_fraction(graph, i, modes) for i in range(120)]
    assert fractions.tolist() == expected


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(6, 60),
    half_k=st.integers(1, 3),
    beta=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_generated_graphs_are_simple_and_conserve_edges(n, half_k, beta, seed):
    k = 2 * half_k
    if k >= n:
        return
    graph = _gen(n, k, beta, seed)
    assert graph.n_edges == n * k // 2
    assert graph.degree.sum() == 2 * graph.n_edges
    assert graph.degree.min() >= half_k
    _assert_simple_undirected(graph)
