"""Distance matrices and k-MST similarity graphs.

The similarity graph of a window is the union of ``k`` mutually edge-disjoint
minimum spanning trees of the complete graph on the window's observations.
Edge weights are pairwise dissimilarities. Equal weights are ordered by a
fixed 64-bit hash of the pair's global observation indices: the construction
stays deterministic, while tied edges are not systematically routed to early
observations (which would bias edge counts along the time axis).
"""

from dataclasses import dataclass
import math

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .exceptions import ConfigError, InvalidData

METRICS = ("euclidean", "manhattan", "hamming")
_SCIPY_METRIC = {"euclidean": "euclidean", "manhattan": "cityblock", "hamming": "hamming"}


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, zero-diagonal matrix of nonnegative dissimilarities.

    Parameters
    ----------
    d : ndarray of shape (n, n)
        Pairwise dissimilarities, 0-based over the observations it covers.
    offset : int, default=0
        Global 0-based index of the first observation covered.
    """

    d: np.ndarray
    offset: int = 0

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidData(f"distance matrix must be square, got shape {d.shape}")
        object.__setattr__(self, "d", d)

    @property
    def n(self):
        return self.d.shape[0]

    def window(self, a, b):
        """Sub-matrix for the 1-based inclusive observation window ``[a, b]``."""
        return DistanceMatrix(self.d[a - 1:b, a - 1:b], offset=self.offset + a - 1)

    def validate(self, atol=1e-9):
        """Raise :class:`InvalidData` naming the first cell that breaks an invariant."""
        d = self.d
        bad = np.argwhere(~np.isfinite(d))
        if bad.size:
            i, j = bad[0]
            raise InvalidData(f"non-finite distance at cell ({i},{j})")
        bad = np.argwhere(d < 0)
        if bad.size:
            i, j = bad[0]
            raise InvalidData(f"negative distance at cell ({i},{j})")
        diag = np.flatnonzero(np.abs(np.diag(d)) > atol)
        if diag.size:
            i = diag[0]
            raise InvalidData(f"nonzero diagonal at cell ({i},{i})")
        bad = np.argwhere(np.abs(d - d.T) > atol)
        if bad.size:
            i, j = min(tuple(x) for x in bad)
            raise InvalidData(f"asymmetric distance at cell ({i},{j}): {d[i, j]!r} != {d[j, i]!r}")
        return self


def pairwise_distances(data, metric="euclidean"):
    """Compute the pairwise dissimilarities between the rows of ``data``.

    Parameters
    ----------
    data : array-like of shape (n, d)
        Observations in rows. A 1-d array is treated as ``n`` scalar observations.
    metric : {"euclidean", "manhattan", "hamming"}, default="euclidean"

    Returns
    -------
    DistanceMatrix
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidData(f"data must be 2-dimensional, got {x.ndim} dimensions")
    if x.shape[0] < 2:
        raise InvalidData("need at least 2 observations")
    if not np.all(np.isfinite(x)):
        i, j = np.argwhere(~np.isfinite(x))[0]
        raise InvalidData(f"non-finite value at row {i}, column {j}")
    d = cdist(x, x, metric=_SCIPY_METRIC[metric])
    # cdist is symmetric up to rounding; force exact symmetry for tie-breaking
    d = np.triu(d, 1)
    return DistanceMatrix(d + d.T)


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected simple graph on ``n_nodes`` observations.

    ``edges`` is an ``(E, 2)`` integer array with ``u < v`` in each row, listed in
    the order the trees were built. ``n_trees`` counts the spanning trees (or the
    trailing forest) actually added, which can fall short of ``k`` when the
    residual graph disconnects. ``degenerate`` marks graphs built from a matrix
    whose off-diagonal entries are all equal: the edges then only reflect the
    tie-break and carry no similarity information.
    """

    n_nodes: int
    edges: np.ndarray
    k: int = 1
    n_trees: int = 0
    degenerate: bool = False

    @property
    def num_edges(self):
        return int(self.edges.shape[0])

    def edge_set(self):
        return {(int(u), int(v)) for u, v in self.edges}


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _kruskal_rounds(eu, ev, n, k):
    m = eu.shape[0]
    used = np.zeros(m, dtype=np.bool_)
    out_u = np.empty(k * (n - 1), dtype=np.int64)
    out_v = np.empty(k * (n - 1), dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    cnt = 0
    rounds = 0
    for _ in range(k):
        for i in range(n):
            parent[i] = i
        got = 0
        for e in range(m):
            if used[e]:
                continue
            ru = _find(parent, eu[e])
            rv = _find(parent, ev[e])
            if ru != rv:
                parent[ru] = rv
                used[e] = True
                out_u[cnt] = eu[e]
                out_v[cnt] = ev[e]
                cnt += 1
                got += 1
                if got == n - 1:
                    break
        if got > 0:
            rounds += 1
        if got < n - 1:
            break
    return out_u[:cnt], out_v[:cnt], rounds


_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def pair_key(u, v):
    """splitmix64 of ``(u << 32) | v``: a bijective scramble of the pair index."""
    z = (np.asarray(u, dtype=np.uint64) << np.uint64(32)) | np.asarray(v, dtype=np.uint64)
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _sorted_edges(d, offset=0):
    n = d.shape[0]
    iu, iv = np.triu_indices(n, 1)
    w = d[iu, iv]
    order = np.lexsort((pair_key(iu + offset, iv + offset), w))
    return iu[order], iv[order], w[order]


def build_kmst(dist, k):
    """Union of ``k`` successive edge-disjoint minimum spanning trees.

    Parameters
    ----------
    dist : DistanceMatrix or ndarray of shape (n, n)
    k : int
        Number of trees, ``1 <= k <= n - 1``.

    Returns
    -------
    SimilarityGraph
        When the residual graph no longer admits a spanning tree, its maximal
        spanning forest is included and construction stops.
    """
    if not isinstance(dist, DistanceMatrix):
        dist = DistanceMatrix(dist)
    d = dist.d
    n = d.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if n < 2:
        raise InvalidData("need at least 2 nodes to build a k-MST")
    k = int(k)
    eu, ev, w = _sorted_edges(d, dist.offset)
    degenerate = bool(w[0] == w[-1])
    # at most n(n-1)/2 edges exist, so no more than n/2 full trees fit
    k_eff = min(k, n - 1)
    u, v, rounds = _kruskal_rounds(eu, ev, n, k_eff)
    edges = np.column_stack((u, v))
    return SimilarityGraph(n_nodes=n, edges=edges, k=k, n_trees=int(rounds),
                           degenerate=degenerate)


@dataclass(frozen=True)
class GraphStats:
    """Degree-based summaries of a similarity graph.

    ``v_g`` is the degree variability ``sum(deg**2) - 4 * |G|**2 / n`` and
    ``two_hop_sq_sum`` is ``sum_i |G_{i,2}|**2`` where ``G_{i,2}`` holds the edges
    touching node ``i`` or one of its neighbours. The two-hop sum only serves as
    a diagnostic for the chi-square approximation.
    """

    n_nodes: int
    degrees: np.ndarray
    sum_deg_sq: int
    num_edges: int
    v_g: float
    two_hop_sq_sum: int

    @property
    def a1(self):
        """Ordered pairs of distinct edges sharing a node."""
        return int(np.sum(self.degrees * (self.degrees - 1)))

    @property
    def a2(self):
        """Ordered pairs of node-disjoint edges."""
        return self.num_edges * (self.num_edges - 1) - self.a1


def graph_stats(g, two_hop=True):
    """Exact degree statistics of ``g``.

    The two-hop sum costs ``O(sum(deg**2))``; pass ``two_hop=False`` to skip it on
    hot paths.
    """
    n = g.n_nodes
    edges = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    deg = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
    sum_deg_sq = int(np.sum(deg * deg))
    v_g = sum_deg_sq - 4.0 * m * m / n if n > 0 else 0.0
    two = 0
    if two_hop and m:
        nbrs = [set() for _ in range(n)]
        for u, v in edges:
            nbrs[u].add(int(v))
            nbrs[v].add(int(u))
        for i in range(n):
            ball = nbrs[i] | {i}
            touching = sum(int(deg[u]) for u in ball)
            inside = sum(1 for u in ball for w in nbrs[u] if w in ball) // 2
            two += (touching - inside) ** 2
    return GraphStats(n_nodes=n, degrees=deg, sum_deg_sq=sum_deg_sq,
                      num_edges=m, v_g=float(v_g), two_hop_sq_sum=int(two))


def default_k(window_len, stage="search", search_cap=30, prune_cap=5):
    """Default MST multiplicity ``min(cap, floor(sqrt(window_len)))``, at least 1.

    Callers pass ``b - a`` for a search interval ``[a, b]`` and
    ``tau_next - tau_prev`` for a pruning window.
    """
    if stage == "search":
        cap = search_cap
    elif stage == "prune":
        cap = prune_cap
    else:
        raise ConfigError(f"stage must be 'search' or 'prune', got {stage!r}")
    return max(1, min(int(cap), math.isqrt(max(int(window_len), 0))))
