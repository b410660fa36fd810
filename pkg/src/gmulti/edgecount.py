"""Generalized edge-count statistics and their permutation null.

For a window ``[a, b]`` with similarity graph ``G`` and a split ``t``,
``R1(t)`` counts edges with both ends in ``[a, t]`` and ``R2(t)`` edges with
both ends in ``[t + 1, b]``. The statistic ``S(t)`` is the quadratic form of
``(R1, R2)`` centred by its permutation mean and scaled by the inverse of its
permutation covariance.
"""

from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np
from numba import njit

from .exceptions import InvalidWindow, WindowTooShort
from .simgraph import SimilarityGraph, graph_stats

DEFAULT_TRIM = 0.1
DEFAULT_PERMUTATIONS = 999
PINV_RTOL = 1e-12
_EPS = 1e-9


@dataclass(frozen=True)
class EdgeCountProfile:
    """Edge counts ``r1[t - a]``, ``r2[t - a]`` for every split ``t`` in ``[a, b]``.

    The last entry (``t = b``) is the degenerate split with every node on the
    left; it is kept so the profile covers the window end to end.
    """

    window: tuple
    r1: np.ndarray
    r2: np.ndarray

    def at(self, t):
        a, b = self.window
        if not a <= t <= b:
            raise InvalidWindow(f"split {t} outside window [{a}, {b}]")
        return int(self.r1[t - a]), int(self.r2[t - a])


@dataclass(frozen=True)
class NullMoments:
    """Permutation mean and covariance of ``(R1, R2)`` at one split."""

    mean_r1: float
    mean_r2: float
    cov: np.ndarray


@dataclass
class ScanResult:
    """Outcome of scanning one window.

    ``t_hat`` is a 1-based observation index, ``s_profile[i]`` is ``S`` at split
    ``scan_range[0] + i``.
    """

    window: tuple
    t_hat: int
    s_max: float
    scan_range: tuple
    p_value: float = None
    s_profile: np.ndarray = None


def edge_count_profile(g, window):
    """Exact ``(R1, R2)`` at every split of ``window``.

    Graph node ``i`` is observation ``a + i``. Runs in ``O(|G| + b - a)``.
    """
    a, b = window
    n = b - a + 1
    if n < 2:
        raise InvalidWindow(f"window [{a}, {b}] is shorter than 2")
    if g.n_nodes != n:
        raise InvalidWindow(f"graph has {g.n_nodes} nodes but window [{a}, {b}] has {n}")
    e = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    hi = np.bincount(e.max(axis=1), minlength=n)
    lo = np.bincount(e.min(axis=1), minlength=n)
    r1 = np.cumsum(hi)
    r2 = e.shape[0] - np.cumsum(lo)
    return EdgeCountProfile(window=(a, b), r1=r1.astype(np.int64), r2=r2.astype(np.int64))


def _falling(x, j):
    out = np.ones_like(np.asarray(x, dtype=float))
    for i in range(j):
        out = out * (x - i)
    return out


def _moment_arrays(num_edges, a1, n1, n_total):
    """Closed-form moments, vectorised over the left-group sizes ``n1``."""
    n1 = np.asarray(n1, dtype=float)
    n2 = n_total - n1
    m = float(num_edges)
    a2 = m * (m - 1.0) - a1
    N = float(n_total)
    f2, f3, f4 = _falling(N, 2), _falling(N, 3), _falling(N, 4)

    def side(k):
        mean = m * _falling(k, 2) / f2
        second = mean + a1 * _falling(k, 3) / f3 + a2 * _falling(k, 4) / f4
        return mean, second - mean * mean

    e1, v1 = side(n1)
    e2, v2 = side(n2)
    c12 = a2 * _falling(n1, 2) * _falling(n2, 2) / f4 - e1 * e2
    return e1, e2, v1, v2, c12


def _enumerate_moments(edges, n1, n_total):
    vals = []
    for left in combinations(range(n_total), n1):
        inside = np.zeros(n_total, dtype=bool)
        inside[list(left)] = True
        both = inside[edges[:, 0]] & inside[edges[:, 1]]
        none = ~inside[edges[:, 0]] & ~inside[edges[:, 1]]
        vals.append((both.sum(), none.sum()))
    v = np.asarray(vals, dtype=float).reshape(-1, 2)
    return NullMoments(mean_r1=float(v[:, 0].mean()), mean_r2=float(v[:, 1].mean()),
                       cov=np.cov(v.T, bias=True).reshape(2, 2))


def permutation_moments(stats, n1, n_total, edges=None):
    """Mean and covariance of ``(R1, R2)`` when ``n1`` of ``n_total`` nodes are
    assigned uniformly at random to the left group.

    Parameters
    ----------
    stats : GraphStats or SimilarityGraph
    n1 : int
    n_total : int
    edges : ndarray, optional
        Needed only for ``n_total < 4``, where moments are enumerated exactly.
    """
    if isinstance(stats, SimilarityGraph):
        edges = stats.edges if edges is None else edges
        stats = graph_stats(stats, two_hop=False)
    if n1 <= 0 or n1 >= n_total:
        # deterministic split: every edge falls on one side
        m = float(stats.num_edges)
        mean = (m, 0.0) if n1 >= n_total else (0.0, m)
        return NullMoments(mean_r1=mean[0], mean_r2=mean[1], cov=np.zeros((2, 2)))
    if n_total < 4:
        if edges is None:
            raise InvalidWindow("moments for windows shorter than 4 need the edge list")
        return _enumerate_moments(np.asarray(edges, dtype=np.int64).reshape(-1, 2), n1, n_total)
    e1, e2, v1, v2, c12 = _moment_arrays(stats.num_edges, stats.a1, n1, n_total)
    cov = np.array([[float(v1), float(c12)], [float(c12), float(v2)]])
    return NullMoments(mean_r1=float(e1), mean_r2=float(e2), cov=cov)


def _pinv_2x2(v11, v12, v22):
    """Moore-Penrose inverses of a stack of symmetric 2x2 matrices.

    Eigenvalues below ``PINV_RTOL * max(1, trace)`` count as zero.
    """
    mats = np.empty(np.shape(v11) + (2, 2))
    mats[..., 0, 0] = v11
    mats[..., 0, 1] = v12
    mats[..., 1, 0] = v12
    mats[..., 1, 1] = v22
    w, q = np.linalg.eigh(mats)
    tol = PINV_RTOL * np.maximum(1.0, np.abs(w).sum(axis=-1))
    inv_w = np.where(w > tol[..., None], 1.0 / np.where(w > tol[..., None], w, 1.0), 0.0)
    p = np.einsum("...ik,...k,...jk->...ij", q, inv_w, q)
    return p[..., 0, 0], p[..., 0, 1], p[..., 1, 1]


def generalized_stat(r1, r2, moments):
    """``S = delta' pinv(cov) delta`` with ``delta = (r1 - E r1, r2 - E r2)``."""
    d1 = r1 - moments.mean_r1
    d2 = r2 - moments.mean_r2
    c = np.asarray(moments.cov, dtype=float)
    p11, p12, p22 = _pinv_2x2(c[0, 0], 0.5 * (c[0, 1] + c[1, 0]), c[1, 1])
    s = float(p11 * d1 * d1 + 2.0 * p12 * d1 * d2 + p22 * d2 * d2)
    return max(s, 0.0)


def scan_range(a, b, trim=DEFAULT_TRIM):
    """Scan endpoints ``(ceil(a + trim*len), floor(b - trim*len))`` for ``[a, b]``."""
    off = trim * (b - a + 1)
    return math.ceil(a + off - _EPS), math.floor(b - off + _EPS)


class WindowScanner:
    """Precomputed null moments for scanning one window's graph.

    Splits are handled as local positions: position ``p`` (0-based) puts the
    first ``p + 1`` nodes on the left.
    """

    def __init__(self, g, window, trim=DEFAULT_TRIM, lo=None, hi=None):
        a, b = window
        n = b - a + 1
        if n < 2:
            raise InvalidWindow(f"window [{a}, {b}] is shorter than 2")
        if g.n_nodes != n:
            raise InvalidWindow(f"graph has {g.n_nodes} nodes but window [{a}, {b}] has {n}")
        if lo is None or hi is None:
            lo, hi = scan_range(a, b, trim)
        lo, hi = max(lo, a), min(hi, b - 1)
        if lo > hi:
            raise WindowTooShort(f"empty scan range for window [{a}, {b}] with trim {trim}")
        self.g = g
        self.window = (a, b)
        self.scan_bounds = (lo, hi)
        self.lo = lo - a
        self.hi = hi - a
        e = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
        self.eu = np.ascontiguousarray(e[:, 0])
        self.ev = np.ascontiguousarray(e[:, 1])
        self.degenerate = g.degenerate or e.shape[0] == 0
        n1 = np.arange(self.lo, self.hi + 1) + 1
        if n < 4:
            mom = [permutation_moments(graph_stats(g, two_hop=False), int(k), n, edges=e) for k in n1]
            self.m1 = np.array([x.mean_r1 for x in mom])
            self.m2 = np.array([x.mean_r2 for x in mom])
            cov = np.array([x.cov for x in mom])
            v11, v12, v22 = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
        else:
            st = graph_stats(g, two_hop=False)
            self.m1, self.m2, v11, v22, v12 = _moment_arrays(st.num_edges, st.a1, n1, n)
        self.p11, self.p12, self.p22 = _pinv_2x2(v11, v12, v22)

    def profile(self):
        """``S`` at every split of the scan range."""
        if self.degenerate:
            return np.zeros(self.hi - self.lo + 1)
        prof = edge_count_profile(self.g, self.window)
        d1 = prof.r1[self.lo:self.hi + 1] - self.m1
        d2 = prof.r2[self.lo:self.hi + 1] - self.m2
        s = self.p11 * d1 * d1 + 2.0 * self.p12 * d1 * d2 + self.p22 * d2 * d2
        return np.maximum(s, 0.0)

    def scan(self):
        s = self.profile()
        i = int(np.argmax(s))
        return ScanResult(window=self.window, t_hat=self.scan_bounds[0] + i, s_max=float(s[i]),
                          scan_range=self.scan_bounds, s_profile=s)

    def exceedances(self, s_obs, n_perm, rng, stop_above=None):
        """Count permutations whose max-scan reaches ``s_obs``.

        Returns ``(count, done)``. With ``stop_above`` set, the loop ends as soon as
        ``count`` exceeds it, so ``done`` may be less than ``n_perm``.
        """
        if self.degenerate:
            # every relabelling gives the same all-zero profile
            return (n_perm if s_obs <= 0.0 else 0), n_perm
        stop = n_perm + 1 if stop_above is None else int(stop_above)
        return _perm_exceed(rng, self.g.n_nodes, self.eu, self.ev, self.lo, self.hi,
                            self.m1, self.m2, self.p11, self.p12, self.p22,
                            int(n_perm), float(s_obs), stop)


@njit(cache=True)
def _max_stat(pos, eu, ev, n, lo, hi, m1, m2, p11, p12, p22, cmax, cmin):
    for i in range(n):
        cmax[i] = 0
        cmin[i] = 0
    ne = eu.shape[0]
    for e in range(ne):
        pu = pos[eu[e]]
        pv = pos[ev[e]]
        if pu > pv:
            cmax[pu] += 1
            cmin[pv] += 1
        else:
            cmax[pv] += 1
            cmin[pu] += 1
    r1 = 0
    r2 = ne
    best = 0.0
    for t in range(hi + 1):
        r1 += cmax[t]
        r2 -= cmin[t]
        if t >= lo:
            j = t - lo
            d1 = r1 - m1[j]
            d2 = r2 - m2[j]
            s = p11[j] * d1 * d1 + 2.0 * p12[j] * d1 * d2 + p22[j] * d2 * d2
            if s > best:
                best = s
    return best


@njit(cache=True)
def _perm_exceed(rng, n, eu, ev, lo, hi, m1, m2, p11, p12, p22, n_perm, s_obs, stop_above):
    pos = np.arange(n)
    cmax = np.zeros(n, dtype=np.int64)
    cmin = np.zeros(n, dtype=np.int64)
    count = 0
    done = 0
    for _ in range(n_perm):
        # Fisher-Yates; reshuffling the previous permutation keeps it uniform
        for i in range(n - 1, 0, -1):
            j = rng.integers(0, i + 1)
            tmp = pos[i]
            pos[i] = pos[j]
            pos[j] = tmp
        done += 1
        if _max_stat(pos, eu, ev, n, lo, hi, m1, m2, p11, p12, p22, cmax, cmin) >= s_obs:
            count += 1
            if count > stop_above:
                break
    return count, done


def scan_window(g, window, trim=DEFAULT_TRIM):
    """Maximise ``S`` over the trimmed scan range of ``window``.

    Ties go to the smallest split. The returned result carries no p-value.
    """
    return WindowScanner(g, window, trim).scan()


def permutation_pvalue(g, window, s_obs, n_perm=DEFAULT_PERMUTATIONS, rng=None,
                       trim=DEFAULT_TRIM):
    """Monte Carlo p-value ``(1 + #{max-scan >= s_obs}) / (n_perm + 1)``.

    Each replicate relabels the graph nodes by a uniform random permutation,
    which is equivalent to permuting the window's observations.
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    rng = np.random.default_rng(rng)
    count, _ = WindowScanner(g, window, trim).exceedances(s_obs, n_perm, rng)
    return (1 + count) / (n_perm + 1)
