from itertools import combinations

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from gmulti.exceptions import ConfigError, InvalidData
from gmulti.simgraph import (
    DistanceMatrix, SimilarityGraph, build_kmst, default_k, graph_stats, pair_key,
    pairwise_distances,
)


def _components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(i) for i in range(n)})


def _brute_mst_weight(d, banned=()):
    """Minimum spanning-tree weight by enumerating every (n-1)-edge subset."""
    n = d.shape[0]
    pairs = [p for p in combinations(range(n), 2) if p not in banned]
    best = np.inf
    for sub in combinations(pairs, n - 1):
        if _components(n, sub) == 1:
            best = min(best, sum(d[u, v] for u, v in sub))
    return best


def _random_distinct(rng, n):
    x = rng.normal(size=(n, 3))
    return pairwise_distances(x).d


def test_euclidean_1d():
    d = pairwise_distances(np.array([[0.0], [3.0], [7.0]]))
    np.testing.assert_array_equal(d.d, [[0, 3, 7], [3, 0, 4], [7, 4, 0]])


def test_pythagoras():
    d = pairwise_distances(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert d.d[0, 1] == pytest.approx(np.sqrt(2))


def test_manhattan_and_hamming():
    x = np.array([[0, 0, 1], [1, 2, 1]], dtype=float)
    assert pairwise_distances(x, "manhattan").d[0, 1] == 3
    # scipy's hamming is the fraction of differing coordinates
    assert pairwise_distances(x, "hamming").d[0, 1] == pytest.approx(2 / 3)


def test_bad_metric_and_values():
    with pytest.raises(ConfigError):
        pairwise_distances(np.zeros((3, 2)), "cosine")
    with pytest.raises(InvalidData):
        pairwise_distances(np.array([[0.0], [np.nan]]))


def test_validate_names_asymmetric_cell():
    d = np.array([[0, 1, 2], [1.5, 0, 1], [2, 1, 0]], dtype=float)
    with pytest.raises(InvalidData, match=r"\(0, ?1\)"):
        DistanceMatrix(d).validate()
    with pytest.raises(InvalidData):
        DistanceMatrix(np.array([[1.0, 1], [1, 0]])).validate()


def test_window_offsets():
    dm = pairwise_distances(np.arange(10.0)[:, None])
    w = dm.window(3, 6)
    assert w.n == 4 and w.offset == 2
    np.testing.assert_array_equal(w.d, dm.d[2:6, 2:6])


def test_points_on_a_line():
    g = build_kmst(pairwise_distances(np.array([[0.0], [1], [2], [10]])), 1)
    assert g.edge_set() == {(0, 1), (1, 2), (2, 3)}
    assert g.num_edges == 3


def test_path_stats():
    g = SimilarityGraph(n_nodes=3, edges=np.array([[0, 1], [1, 2]]))
    s = graph_stats(g)
    assert s.sum_deg_sq == 6
    assert s.v_g == pytest.approx(6 - 4 * 4 / 3)
    assert s.a1 == 2 and s.a2 == 0


def test_k_validation():
    with pytest.raises(ConfigError):
        build_kmst(np.zeros((3, 3)), 0)


@pytest.mark.parametrize("seed", range(8))
def test_mst_matches_spanning_tree_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 4 + seed % 3
    d = _random_distinct(rng, n)
    g = build_kmst(d, 1)
    weight = sum(d[u, v] for u, v in g.edges)
    assert weight == pytest.approx(_brute_mst_weight(d), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_second_tree_is_mst_of_residual(seed):
    rng = np.random.default_rng(100 + seed)
    n = 5 + seed % 2
    d = _random_distinct(rng, n)
    g = build_kmst(d, 2)
    first = {tuple(e) for e in g.edges[: n - 1].tolist()}
    second = g.edges[n - 1:]
    assert len(second) == n - 1
    assert not first & {tuple(e) for e in second.tolist()}
    weight = sum(d[u, v] for u, v in second)
    assert weight == pytest.approx(_brute_mst_weight(d, banned=first), abs=1e-12)


def test_stops_when_residual_disconnects():
    d = _random_distinct(np.random.default_rng(3), 4)
    g = build_kmst(d, 3)
    # K4 has 6 edges: two trees use all of them
    assert g.num_edges == 6 and g.n_trees == 2


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 25), k=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_kmst_invariants(n, k, seed):
    x = np.random.default_rng(seed).integers(0, 4, size=(n, 2)).astype(float)
    g = build_kmst(pairwise_distances(x), k)
    e = g.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert len(g.edge_set()) == g.num_edges
    assert g.num_edges <= min(k * (n - 1), n * (n - 1) // 2)
    assert _components(n, e.tolist()) == 1
    s = graph_stats(g, two_hop=False)
    assert s.degrees.sum() == 2 * g.num_edges


def test_tie_break_is_deterministic_and_offset_aware():
    x = np.zeros((6, 1))
    x[3:] = 1.0
    dm = pairwise_distances(x)
    a = build_kmst(dm, 2)
    b = build_kmst(dm, 2)
    np.testing.assert_array_equal(a.edges, b.edges)
    assert not a.degenerate
    assert build_kmst(pairwise_distances(np.ones((5, 2))), 1).degenerate


def test_pair_key_injective_on_small_grid():
    u, v = np.triu_indices(200, 1)
    keys = pair_key(u, v)
    assert len(np.unique(keys)) == len(keys)


def test_default_k():
    assert default_k(100) == 10
    assert default_k(2000) == 30
    assert default_k(100, "prune") == 5
    assert default_k(3, "prune") == 1
    assert default_k(0) == 1
    with pytest.raises(ConfigError):
        default_k(10, "other")
