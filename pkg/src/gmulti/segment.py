"""Candidate change-point search by wild and seeded binary segmentation.

Both searches test a family of sub-intervals of the current window, keep the
interval with the smallest permutation p-value and, if that p-value is below
``alpha``, record its best split and recurse on both sides.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import NamedTuple

import numpy as np

from .edgecount import DEFAULT_PERMUTATIONS, DEFAULT_TRIM, WindowScanner
from .exceptions import ConfigError, InvalidWindow
from .simgraph import DistanceMatrix, build_kmst, default_k, pairwise_distances

logger = logging.getLogger(__name__)

_EPS = 1e-9


class Interval(NamedTuple):
    """1-based inclusive observation window."""

    start: int
    end: int

    @property
    def length(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class Provenance:
    """Where a candidate came from: the winning interval and its test outcome."""

    interval: Interval
    p_value: float
    s_max: float
    parent: Interval


@dataclass
class CandidateSet:
    """Sorted candidate change-points with the provenance of each."""

    n: int
    points: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, t, prov):
        if not 0 < t < self.n:
            raise InvalidWindow(f"candidate {t} outside (0, {self.n})")
        if t in self.provenance:
            return
        self.provenance[t] = prov
        self.points = sorted(self.provenance)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass
class SearchConfig:
    """Parameters of the candidate search.

    Attributes
    ----------
    alpha : float
        Significance level for accepting a split.
    n_intervals : int
        Number of random intervals drawn per recursion step (wild search).
    gamma : float
        Decay of seeded interval lengths between layers.
    min_len : int
        Minimum interval length.
    n_permutations : int
        Monte Carlo permutations per p-value.
    seed : int or None
        Seed for interval sampling and permutations.
    trim : float
        Fraction trimmed from each end of an interval's scan range.
    k_cap : int
        Upper bound on the MST multiplicity of search graphs.
    """

    alpha: float = 0.01
    n_intervals: int = 100
    gamma: float = math.sqrt(0.5)
    min_len: int = 10
    n_permutations: int = DEFAULT_PERMUTATIONS
    seed: int = None
    trim: float = DEFAULT_TRIM
    k_cap: int = 30

    def validate(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_intervals < 1:
            raise ConfigError(f"n_intervals must be >= 1, got {self.n_intervals}")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.min_len < 4:
            raise ConfigError(f"min_len must be >= 4, got {self.min_len}")
        if self.n_permutations < 1:
            raise ConfigError(f"n_permutations must be >= 1, got {self.n_permutations}")
        if not 0 <= self.trim < 0.5:
            raise ConfigError(f"trim must lie in [0, 0.5), got {self.trim}")
        if self.k_cap < 1:
            raise ConfigError(f"k_cap must be >= 1, got {self.k_cap}")
        return self


def _all_intervals(a, b, min_len):
    return [Interval(s, e) for s in range(a, b - min_len + 2)
            for e in range(s + min_len - 1, b + 1)]


def sample_intervals(a, b, n_intervals, min_len, rng):
    """Intervals of length at least ``min_len`` inside ``[a, b]``.

    When ``n_intervals`` reaches the number of such intervals, all of them are
    returned (ordered by start, then end). Otherwise ``[a, b]`` comes first,
    followed by ``n_intervals`` uniform draws.
    """
    if b - a + 1 < min_len:
        return []
    total = (b - a - min_len + 2) * (b - a - min_len + 3) // 2
    if n_intervals >= total:
        return _all_intervals(a, b, min_len)
    out = [Interval(a, b)]
    while len(out) < n_intervals + 1:
        need = n_intervals + 1 - len(out)
        x = rng.integers(a, b + 1, size=(2 * need + 8, 2))
        lo, hi = x.min(axis=1), x.max(axis=1)
        ok = hi - lo + 1 >= min_len
        out.extend(Interval(int(s), int(e)) for s, e in zip(lo[ok], hi[ok]))
    return out[:n_intervals + 1]


def seeded_layers(n, gamma=math.sqrt(0.5), min_len=10):
    """Real-endpoint layers ``[[(lo, hi), ...], ...]`` of the seeded family.

    Layer ``k`` covers ``[0, n]`` with ``2*ceil(gamma**-(k-1)) - 1`` evenly shifted
    intervals of length ``n * gamma**(k-1)``; the first layer is ``[(0, n)]``.
    """
    if not 0 < gamma < 1:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    n_layers = math.floor(math.log((min_len - 1) / n) / math.log(gamma) + 1 + _EPS)
    layers = []
    for k in range(1, n_layers + 1):
        # (1/gamma)**(k-1) can land a hair above an integer, e.g. sqrt(2)**2
        ratio = math.ceil((1.0 / gamma) ** (k - 1) - _EPS)
        count = 2 * ratio - 1
        length = n * gamma ** (k - 1)
        step = 0.0 if count == 1 else n * (1 - gamma ** (k - 1)) / (2 * ratio - 2)
        layers.append([(math.floor((j - 1) * step + _EPS),
                        math.ceil((j - 1) * step + length - _EPS))
                       for j in range(1, count + 1)])
    return layers


def seeded_intervals(n, gamma=math.sqrt(0.5), min_len=10):
    """Deterministic multi-scale interval family over ``[1, n]``.

    Real endpoints ``[lo, hi]`` from :func:`seeded_layers` become the observation
    window ``[lo + 1, hi]`` clipped to ``[1, n]``; windows shorter than
    ``min_len`` and repeats are dropped.
    """
    if n <= min_len:
        return [Interval(1, n)] if n == min_len else []
    seen, out = set(), []
    for layer in seeded_layers(n, gamma, min_len):
        for lo, hi in layer:
            iv = Interval(max(lo + 1, 1), min(hi, n))
            if iv.length >= min_len and iv not in seen:
                seen.add(iv)
                out.append(iv)
    return out


def _as_distance(data, metric="euclidean"):
    if isinstance(data, DistanceMatrix):
        return data
    return pairwise_distances(data, metric)


@dataclass
class _Best:
    index: int = -1
    count: int = 0
    s_max: float = -np.inf
    t_hat: int = 0
    interval: Interval = None
    n_perm: int = 0

    @property
    def p_value(self):
        return (1 + self.count) / (self.n_perm + 1)


def _select_interval(dist, intervals, cfg, rng):
    """Interval with the smallest Monte Carlo p-value.

    Ties go to the larger maximum statistic, then to the earlier interval. Every
    interval draws its own child generator, so abandoning a replicate loop once
    it can no longer win leaves later intervals' permutations unchanged.
    """
    best = _Best(n_perm=cfg.n_permutations)
    for idx, iv in enumerate(intervals):
        child = np.random.default_rng(rng.integers(0, 2**63 - 1))
        a, b = iv
        g = build_kmst(dist.window(a, b), default_k(b - a, "search", search_cap=cfg.k_cap))
        try:
            scanner = WindowScanner(g, (a, b), cfg.trim)
        except InvalidWindow:
            continue
        res = scanner.scan()
        stop = None if best.index < 0 else best.count
        count, _ = scanner.exceedances(res.s_max, cfg.n_permutations, child, stop_above=stop)
        if stop is not None and count > stop:
            continue
        if best.index < 0 or count < best.count or (count == best.count and res.s_max > best.s_max):
            best = _Best(index=idx, count=count, s_max=res.s_max, t_hat=res.t_hat,
                         interval=iv, n_perm=cfg.n_permutations)
    return best


def _binary_segmentation(dist, window, cfg, rng, out, intervals_for):
    stack = [Interval(*window)]
    while stack:
        a, b = stack.pop()
        if b - a + 1 < cfg.min_len:
            continue
        intervals = intervals_for(a, b)
        if not intervals:
            continue
        best = _select_interval(dist, intervals, cfg, rng)
        if best.index < 0:
            continue
        logger.debug("window [%d, %d]: best interval %s p=%.4g t=%d",
                     a, b, best.interval, best.p_value, best.t_hat)
        if best.p_value < cfg.alpha:
            out.add(best.t_hat, Provenance(best.interval, best.p_value, best.s_max, Interval(a, b)))
            # right side first so the left side is explored first
            stack.append(Interval(best.t_hat + 1, b))
            stack.append(Interval(a, best.t_hat))
    return out


def gwbs(data, window=None, cfg=None, rng=None, out=None, metric="euclidean"):
    """Graph-based wild binary segmentation.

    Parameters
    ----------
    data : array-like of shape (n, d) or DistanceMatrix
    window : (int, int), optional
        1-based inclusive window to search, the whole sequence by default.
    cfg : SearchConfig, optional
    rng : numpy Generator or seed, optional
        Defaults to ``cfg.seed``.
    out : CandidateSet, optional
        Candidates are added to it in place.

    Returns
    -------
    CandidateSet
    """
    cfg = (cfg or SearchConfig()).validate()
    dist = _as_distance(data, metric)
    window = window or (1, dist.n)
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    out = out if out is not None else CandidateSet(n=dist.n)

    def intervals_for(a, b):
        return sample_intervals(a, b, cfg.n_intervals, cfg.min_len, rng)

    return _binary_segmentation(dist, window, cfg, rng, out, intervals_for)


def gsbs(data, window=None, cfg=None, seeds=None, out=None, rng=None, metric="euclidean"):
    """Graph-based seeded binary segmentation.

    ``seeds`` defaults to :func:`seeded_intervals` over the whole sequence. Each
    window tests itself first, then every seed interval it contains.
    """
    cfg = (cfg or SearchConfig()).validate()
    dist = _as_distance(data, metric)
    window = window or (1, dist.n)
    if seeds is None:
        seeds = seeded_intervals(dist.n, cfg.gamma, cfg.min_len)
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    out = out if out is not None else CandidateSet(n=dist.n)

    def intervals_for(a, b):
        inner = [iv for iv in seeds if a <= iv.start and iv.end <= b and iv != (a, b)]
        return [Interval(a, b)] + inner

    return _binary_segmentation(dist, window, cfg, rng, out, intervals_for)
