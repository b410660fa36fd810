from itertools import combinations
import json
import math

import numpy as np
import pytest

from gmulti.exceptions import EmptyCandidates
from gmulti.io import dendrogram_svg
from gmulti.prune import (
    Dendrogram, EliminationTrace, LocalStatistic, adjacent_sum, adjacent_windows,
    backward_eliminate, boundary_set, build_dendrogram, ep_bic, expanded_adjacent_sum, pseudo_bic,
)
from gmulti.simgraph import pairwise_distances


def _shifted(rng, taus, n, d=5, size=2.0):
    x = rng.normal(size=(n, d))
    for j, t in enumerate(taus):
        x[t:] += size * (-1) ** j
    return x


def test_boundary_set_examples():
    assert boundary_set([90], 400) == [0, 400]
    assert boundary_set([90, 230, 320], 400) == [0, 160, 275, 400]
    assert boundary_set([10, 11], 20) == [0, 11, 20]
    with pytest.raises(EmptyCandidates):
        boundary_set([], 20)


def test_ep_bic_arithmetic():
    assert ep_bic(146.94, 3, 400, 2) == pytest.approx(146.94 - 6 * math.log(400))
    assert ep_bic(146.94, 3, 400, 2) == pytest.approx(110.99, abs=0.01)
    assert ep_bic(0.0, 0, 400) == 0
    assert pseudo_bic(10.0, 1, 100) == pytest.approx(10 - 2 * math.log(100))


def test_single_candidate_sums_coincide(rng):
    x = _shifted(rng, [40], 80)
    local = LocalStatistic(pairwise_distances(x))
    assert adjacent_sum(None, [40], local=local) == expanded_adjacent_sum(None, [40], local=local) > 0


def test_expanded_windows_twice_as_long():
    tau = [100, 200, 300]
    wins = adjacent_windows(tau, 400)
    assert wins == [(1, 200, 100), (101, 300, 200), (201, 400, 300)]
    eta = boundary_set(tau, 400)
    # interior windows: neighbour-to-neighbour spans twice the midpoint window
    for (lo, hi, _), a, b in list(zip(wins, eta, eta[1:]))[1:-1]:
        assert hi - lo + 1 == 2 * (b - a)


def test_degenerate_windows_contribute_zero(rng):
    x = rng.normal(size=(30, 2))
    local = LocalStatistic(pairwise_distances(x))
    assert local(1, 3, 2) == 0
    assert local(1, 30, 1) == 0
    assert len(local.warnings) == 2


def test_exact_zero_statistic():
    x = np.ones((20, 2))
    local = LocalStatistic(pairwise_distances(x))
    assert expanded_adjacent_sum(None, [10], local=local) == 0


def test_empty_candidates_trace(rng):
    tr = backward_eliminate(rng.normal(size=(20, 2)), [])
    assert tr.tau_hat == [] and tr.ep_bic == [0.0] and tr.chosen_m == 0
    d = build_dendrogram(tr)
    assert d.root.is_leaf and d.root.segment == (1, 20) and d.merges == []


def test_single_strong_change_kept(rng):
    x = _shifted(rng, [50], 100)
    tr = backward_eliminate(x, [50])
    eas = tr.ep_bic[1] + 2 * math.log(100)
    assert [s for s, _ in tr.steps] == [[50], []]
    assert tr.tau_hat == ([50] if eas > 2 * math.log(100) else [])
    assert tr.tau_hat == [50]


def _all_subsets_best(local, tau, n, c=2.0):
    best = (0.0, ())
    for m in range(1, len(tau) + 1):
        for sub in combinations(tau, m):
            v = ep_bic(expanded_adjacent_sum(None, sub, local=local), m, n, c)
            if v > best[0]:
                best = (v, sub)
    return best


@pytest.mark.parametrize("seed", range(12))
def test_greedy_never_beats_exhaustive(seed):
    rng = np.random.default_rng(seed)
    n = 120
    true = sorted(rng.choice(np.arange(20, 100), size=2, replace=False).tolist())
    x = _shifted(rng, true, n, size=1.5)
    extra = rng.choice(np.arange(10, 110), size=2, replace=False).tolist()
    tau = sorted(set(true + extra))
    local = LocalStatistic(pairwise_distances(x))
    tr = backward_eliminate(None, tau, local=local)
    best, _ = _all_subsets_best(local, tau, n)
    assert tr.ep_bic[tr.chosen_m] <= best + 1e-9
    # nested sets, one point removed per step
    for m in range(1, len(tau) + 1):
        assert set(tr.sets[m - 1]) == set(tr.sets[m]) - {tr.removed[m]}
        assert tr.ep_bic[m - 1] == pytest.approx(
            ep_bic(expanded_adjacent_sum(None, tr.sets[m - 1], local=local), m - 1, n))


def test_removal_tie_drops_smallest():
    class Flat:
        dist = type("D", (), {"n": 100})()
        warnings = []

        def __call__(self, lo, hi, t):
            return 0.0

    tr = backward_eliminate(None, [20, 50, 80], local=Flat())
    assert [tr.removed[m] for m in (3, 2, 1)] == [20, 50, 80]
    assert tr.tau_hat == []


def _trace(rng):
    x = _shifted(rng, [30, 60, 90, 120], 150)
    return backward_eliminate(x, [15, 30, 60, 90, 120, 135])


def test_dendrogram_cut_reproduces_trace_sets(rng):
    tr = _trace(rng)
    d = build_dendrogram(tr)
    m_hat = tr.chosen_m
    assert len(d.leaves) == m_hat + 1 and len(d.merges) == m_hat
    assert d.cut(d.leaves[0].height) == tr.tau_hat
    heights = [nd.height for nd in d.merges]
    assert heights == sorted(heights)
    for i, node in enumerate(d.merges):
        assert all(node.height >= ch.height for ch in node.children)
        assert d.cut(node.height) in [list(s) for s in tr.sets]
        # cutting at a merge height removes at least that merge
        assert node.removed_point not in d.cut(node.height)


def test_dendrogram_one_merge():
    tr = EliminationTrace(n=100, c=2.0, sets=[(), (50,)], ep_bic=[0.0, 30.0],
                          removed=[None, 50], chosen_m=1)
    d = build_dendrogram(tr)
    assert d.root.height == 0.0 and d.leaves[0].height == -30.0
    assert [leaf.segment for leaf in d.leaves] == [(1, 50), (51, 100)]


def test_dendrogram_json_roundtrip(rng):
    d = build_dendrogram(_trace(rng))
    back = Dendrogram.from_dict(json.loads(json.dumps(d.to_dict())))
    assert back.to_dict() == d.to_dict()
    assert [leaf.segment for leaf in back.leaves] == [leaf.segment for leaf in d.leaves]


def test_svg_seven_merges():
    sets = [tuple(range(10, 10 * (m + 1), 10)) for m in range(8)]
    removed = [None] + [sets[m][-1] for m in range(1, 8)]
    scores = [0.0, 5, 9, 12, 14, 15, 15.5, 15.8]
    tr = EliminationTrace(n=100, c=2.0, sets=sets, ep_bic=scores, removed=removed, chosen_m=7)
    d = build_dendrogram(tr)
    svg = dendrogram_svg(d)
    assert svg.count('class="leaf"') == 8
    assert svg.count('class="merge"') == 7
    tree_heights = sorted(nd.height for nd in d.merges)
    import re
    svg_heights = sorted(float(h) for h in re.findall(r'class="merge"[^>]*data-height="([^"]+)"', svg))
    assert svg_heights == tree_heights


def test_svg_single_leaf():
    tr = EliminationTrace(n=50, c=2.0, sets=[()], ep_bic=[0.0], removed=[None], chosen_m=0)
    svg = dendrogram_svg(build_dendrogram(tr))
    assert svg.count('class="leaf"') == 1 and "<path" not in svg and "1-50" in svg
