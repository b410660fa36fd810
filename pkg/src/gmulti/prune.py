"""Goodness-of-fit pruning of candidate change-points.

Each candidate is scored by the generalized edge-count statistic at that
candidate inside a local window. The expanded adjacent sum uses the window
between the two neighbouring candidates; the adjacent sum uses the
non-overlapping window between midpoints. Subtracting ``c * m * log(n)`` from
the expanded sum gives the ep-BIC criterion, maximised greedily by backward
elimination.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .edgecount import DEFAULT_TRIM, WindowScanner, scan_range
from .exceptions import EmptyCandidates, InvalidData
from .simgraph import DistanceMatrix, build_kmst, default_k, pairwise_distances

logger = logging.getLogger(__name__)

DEFAULT_PENALTY = 2.0
MIN_WINDOW = 4


def boundary_set(tau, n):
    """Window boundaries ``0 = eta_0 < ... < eta_m = n`` at rounded-up midpoints."""
    tau = sorted(int(t) for t in tau)
    if not tau:
        raise EmptyCandidates("boundary set needs at least one candidate")
    mids = [math.ceil((x + y) / 2) for x, y in zip(tau, tau[1:])]
    return [0] + mids + [n]


class LocalStatistic:
    """Memoised ``S^{[lo, hi]}(t)`` on prune-stage graphs.

    The graph on ``[lo, hi]`` is the ``min(k_cap, floor(sqrt(hi - lo + 1)))``-MST.
    Windows shorter than 4 observations, or splits outside the trimmed scan
    range, contribute 0; each such case is recorded once in ``warnings``.
    """

    def __init__(self, dist, k_cap=5, trim=DEFAULT_TRIM):
        self.dist = dist
        self.k_cap = k_cap
        self.trim = trim
        self.warnings = []
        self._cache = {}

    def __call__(self, lo, hi, t):
        key = (lo, hi, t)
        if key not in self._cache:
            self._cache[key] = self._compute(lo, hi, t)
        return self._cache[key]

    def _compute(self, lo, hi, t):
        n = hi - lo + 1
        if n < MIN_WINDOW:
            self.warnings.append(f"window [{lo}, {hi}] has fewer than {MIN_WINDOW} observations")
            return 0.0
        s_lo, s_hi = scan_range(lo, hi, self.trim)
        if not s_lo <= t <= s_hi:
            self.warnings.append(f"split {t} outside scan range [{s_lo}, {s_hi}] of [{lo}, {hi}]")
            return 0.0
        g = build_kmst(self.dist.window(lo, hi), default_k(n, "prune", prune_cap=self.k_cap))
        return float(WindowScanner(g, (lo, hi), lo=t, hi=t).profile()[0])


def _local(data, local, metric):
    if local is not None:
        return local
    dist = data if isinstance(data, DistanceMatrix) else pairwise_distances(data, metric)
    return LocalStatistic(dist)


def adjacent_sum(data, tau, local=None, metric="euclidean"):
    """Sum of local statistics over the non-overlapping midpoint windows."""
    stat = _local(data, local, metric)
    tau = sorted(tau)
    if not tau:
        return 0.0
    eta = boundary_set(tau, stat.dist.n)
    return float(sum(stat(eta[j] + 1, eta[j + 1], t) for j, t in enumerate(tau)))


def adjacent_windows(tau, n):
    """``(lo, hi, t)`` triples of the expanded sum: neighbour to neighbour."""
    ext = [0] + sorted(tau) + [n]
    return [(ext[j - 1] + 1, ext[j + 1], ext[j]) for j in range(1, len(ext) - 1)]


def expanded_adjacent_sum(data, tau, local=None, metric="euclidean"):
    """Sum of local statistics, each on the window between its two neighbours."""
    stat = _local(data, local, metric)
    return float(sum(stat(*w) for w in adjacent_windows(tau, stat.dist.n)))


def ep_bic(eas, m, n, c=DEFAULT_PENALTY):
    """``eas - c * m * log(n)`` with the natural logarithm."""
    if n < 2:
        raise InvalidData(f"sequence length must be >= 2, got {n}")
    return eas - c * m * math.log(n)


def pseudo_bic(as_value, m, n):
    """Adjacent-sum criterion ``as_value - 2 * m * log(n)``."""
    return ep_bic(as_value, m, n, c=2.0)


@dataclass
class EliminationTrace:
    """Nested candidate sets produced by backward elimination.

    ``sets[l]`` holds ``l`` points and scores ``ep_bic[l]``; ``removed[l]`` is the
    point dropped when going from ``sets[l]`` to ``sets[l - 1]`` (``removed[0]``
    is ``None``). ``chosen_m`` indexes the selected set.
    """

    n: int
    c: float
    sets: list
    ep_bic: list
    removed: list
    chosen_m: int
    warnings: list = field(default_factory=list)

    @property
    def tau_hat(self):
        return list(self.sets[self.chosen_m])

    @property
    def steps(self):
        """``[(set, ep_bic), ...]`` from the full candidate set down to the empty set."""
        return [(list(self.sets[m]), self.ep_bic[m]) for m in range(len(self.sets) - 1, -1, -1)]


def backward_eliminate(data, tau, c=DEFAULT_PENALTY, local=None, metric="euclidean"):
    """Greedy backward elimination under ep-BIC.

    Each step drops the point whose removal gives the largest ep-BIC (ties
    drop the smallest point) until no point is left. The empty set scores 0.
    Among equally scored sets the smallest one is selected.
    """
    stat = _local(data, local, metric)
    n = stat.dist.n
    current = tuple(sorted(int(t) for t in tau))
    m0 = len(current)
    sets = [None] * (m0 + 1)
    scores = [None] * (m0 + 1)
    removed = [None] * (m0 + 1)
    sets[m0] = current
    scores[m0] = ep_bic(expanded_adjacent_sum(None, current, local=stat), m0, n, c)
    for m in range(m0, 0, -1):
        best, best_score = None, -np.inf
        for j, point in enumerate(current):
            trial = current[:j] + current[j + 1:]
            score = ep_bic(expanded_adjacent_sum(None, trial, local=stat), m - 1, n, c)
            if score > best_score:
                best, best_score = j, score
        removed[m] = current[best]
        current = current[:best] + current[best + 1:]
        sets[m - 1] = current
        scores[m - 1] = best_score
    chosen = int(np.argmax(scores))
    return EliminationTrace(n=n, c=c, sets=[list(s) for s in sets], ep_bic=[float(s) for s in scores],
                            removed=removed, chosen_m=chosen, warnings=list(stat.warnings))


@dataclass
class DendrogramNode:
    """Leaf (``segment`` set) or merge node (``removed_point`` and two children)."""

    height: float
    segment: tuple = None
    removed_point: int = None
    children: list = field(default_factory=list)

    @property
    def is_leaf(self):
        return not self.children

    @property
    def span(self):
        if self.is_leaf:
            return self.segment
        return (self.children[0].span[0], self.children[-1].span[1])

    def to_dict(self):
        if self.is_leaf:
            return {"height": self.height, "removed_point": None, "segment": list(self.segment)}
        return {"height": self.height, "removed_point": self.removed_point,
                "children": [ch.to_dict() for ch in self.children]}

    @classmethod
    def from_dict(cls, obj):
        if "children" in obj:
            return cls(height=float(obj["height"]), removed_point=int(obj["removed_point"]),
                       children=[cls.from_dict(ch) for ch in obj["children"]])
        return cls(height=float(obj["height"]), segment=tuple(obj["segment"]))


@dataclass
class Dendrogram:
    """Binary merge tree over the final segments.

    ``merges`` lists the internal nodes in elimination order; their heights are
    nondecreasing in that order, so cutting at any height reproduces one of the
    nested candidate sets of the trace.
    """

    root: DendrogramNode
    leaves: list
    merges: list
    n: int

    def cut(self, height):
        """Change-points that survive merging every node at or below ``height``."""
        points = {leaf.segment[1] for leaf in self.leaves[:-1]}
        for node in self.merges:
            if node.height <= height:
                points.discard(node.removed_point)
        return sorted(points)

    def to_dict(self):
        return {"n": self.n, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        root = DendrogramNode.from_dict(obj["root"])
        leaves, merges = [], []

        def walk(node):
            if node.is_leaf:
                leaves.append(node)
                return
            for ch in node.children:
                walk(ch)
            merges.append(node)

        walk(root)
        merges.sort(key=lambda nd: nd.height)
        return cls(root=root, leaves=leaves, merges=merges, n=int(obj["n"]))


def build_dendrogram(trace, n=None):
    """Merge the selected segments in the trace's elimination order.

    Leaves sit at ``-ep_bic`` of the selected set. The merge that removes the
    ``l``-th point sits at ``-ep_bic(sets[l - 1])``, raised to the previous merge's
    height when lower so heights never decrease towards the root.
    """
    n = trace.n if n is None else n
    m_hat = trace.chosen_m
    tau = trace.sets[m_hat]
    bounds = [0] + list(tau) + [n]
    leaf_height = -trace.ep_bic[m_hat]
    leaves = [DendrogramNode(height=leaf_height, segment=(bounds[i] + 1, bounds[i + 1]))
              for i in range(len(bounds) - 1)]
    by_end = {leaf.segment[1]: leaf for leaf in leaves}
    by_start = {leaf.segment[0]: leaf for leaf in leaves}
    merges = []
    level = leaf_height
    for m in range(m_hat, 0, -1):
        point = trace.removed[m]
        left, right = by_end.pop(point), by_start.pop(point + 1)
        level = max(level, -trace.ep_bic[m - 1], left.height, right.height)
        node = DendrogramNode(height=level, removed_point=point, children=[left, right])
        start, end = node.span
        by_end[end] = node
        by_start[start] = node
        merges.append(node)
    root = merges[-1] if merges else leaves[0]
    return Dendrogram(root=root, leaves=leaves, merges=merges, n=n)
