"""Two-stage detector with a scikit-learn estimator interface."""

from dataclasses import dataclass
import math
import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError, InvalidData
from .prune import DEFAULT_PENALTY, LocalStatistic, backward_eliminate, build_dendrogram
from .segment import SearchConfig, gsbs, gwbs
from .simgraph import METRICS, DistanceMatrix, pairwise_distances

METHODS = ("wbs", "sbs")


@dataclass
class DetectionResult:
    """Candidates from the search stage plus the pruning trace and its dendrogram."""

    candidates: object
    trace: object
    dendrogram: object
    config: SearchConfig

    @property
    def change_points(self):
        return self.trace.tau_hat


def detect_change_points(dist, method="wbs", cfg=None, penalty=DEFAULT_PENALTY, prune_k_cap=5,
                         rng=None):
    """Search for candidates, then prune them by backward elimination.

    Parameters
    ----------
    dist : DistanceMatrix
    method : {"wbs", "sbs"}
    cfg : SearchConfig, optional
    penalty : float
        ep-BIC penalty constant ``c``.
    prune_k_cap : int
        Upper bound on the MST multiplicity of pruning graphs.
    rng : numpy Generator or seed, optional
        Defaults to ``cfg.seed``.

    Returns
    -------
    DetectionResult
    """
    cfg = (cfg or SearchConfig()).validate()
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    if penalty <= 0:
        raise ConfigError(f"penalty must be > 0, got {penalty}")
    if prune_k_cap < 1:
        raise ConfigError(f"prune_k_cap must be >= 1, got {prune_k_cap}")
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    search = gwbs if method == "wbs" else gsbs
    candidates = search(dist, cfg=cfg, rng=rng)
    local = LocalStatistic(dist, k_cap=prune_k_cap, trim=cfg.trim)
    trace = backward_eliminate(None, candidates.points, c=penalty, local=local)
    return DetectionResult(candidates=candidates, trace=trace,
                           dendrogram=build_dendrogram(trace, dist.n), config=cfg)


class GraphChangePointDetector(ClusterMixin, BaseEstimator):
    """Nonparametric multiple change-point detector built on k-MST similarity graphs.

    The search stage runs wild (``method="wbs"``) or seeded (``method="sbs"``)
    binary segmentation with generalized edge-count scans and Monte Carlo
    permutation p-values. The pruning stage keeps the candidate subset found by
    backward elimination under the ep-BIC criterion.

    Parameters
    ----------
    method : {"wbs", "sbs"}, default="wbs"
    alpha : float, default=0.01
        Significance level of the search stage.
    n_intervals : int, default=100
        Random intervals per recursion step (``wbs`` only).
    gamma : float, default=sqrt(0.5)
        Seeded interval decay (``sbs`` only).
    min_len : int, default=10
        Minimum interval length.
    penalty : float, default=2.0
        ep-BIC penalty constant.
    n_permutations : int, default=999
    trim : float, default=0.1
        Fraction of each interval excluded from both ends of the scan.
    search_k_cap, prune_k_cap : int, default=30, 5
        Caps on the MST multiplicity ``floor(sqrt(length))`` in each stage.
    metric : {"euclidean", "manhattan", "hamming", "precomputed"}, default="euclidean"
        With ``"precomputed"``, ``X`` is a square distance matrix.
    random_state : int, Generator or None

    Attributes
    ----------
    change_points_ : ndarray of int
        Selected change-points, 1-based: ``t`` means a change after observation ``t``.
    candidates_ : CandidateSet
    trace_ : EliminationTrace
    dendrogram_ : Dendrogram
    labels_ : ndarray of shape (n_samples,)
        Segment index of every observation.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = np.vstack([rng.normal(0, 1, (40, 5)), rng.normal(3, 1, (40, 5))])
    >>> GraphChangePointDetector(n_permutations=199, random_state=0).fit(X).change_points_
    array([40])
    """

    def __init__(self, method="wbs", alpha=0.01, n_intervals=100, gamma=math.sqrt(0.5),
                 min_len=10, penalty=DEFAULT_PENALTY, n_permutations=999, trim=0.1,
                 search_k_cap=30, prune_k_cap=5, metric="euclidean", random_state=None):
        self.method = method
        self.alpha = alpha
        self.n_intervals = n_intervals
        self.gamma = gamma
        self.min_len = min_len
        self.penalty = penalty
        self.n_permutations = n_permutations
        self.trim = trim
        self.search_k_cap = search_k_cap
        self.prune_k_cap = prune_k_cap
        self.metric = metric
        self.random_state = random_state

    def _search_config(self):
        seed = self.random_state if isinstance(self.random_state, numbers.Integral) else None
        return SearchConfig(alpha=self.alpha, n_intervals=self.n_intervals, gamma=self.gamma,
                            min_len=self.min_len, n_permutations=self.n_permutations,
                            seed=seed, trim=self.trim, k_cap=self.search_k_cap).validate()

    def _distances(self, X):
        if self.metric not in METRICS + ("precomputed",):
            raise ConfigError(f"unknown metric {self.metric!r}")
        X = check_array(X, dtype=float, ensure_2d=False, ensure_all_finite=False,
                        ensure_min_samples=2)
        if X.ndim == 1:
            X = X[:, None]
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise InvalidData(f"non-finite value at row {i}, column {j}")
        self.n_features_in_ = X.shape[1]
        if self.metric == "precomputed":
            return DistanceMatrix(X).validate()
        return pairwise_distances(X, self.metric)

    def fit(self, X, y=None):
        """Detect change-points in the sequence ``X`` (rows in time order)."""
        cfg = self._search_config()
        dist = self._distances(X)
        if dist.n < self.min_len:
            raise InvalidData(f"sequence of length {dist.n} is shorter than min_len={self.min_len}")
        result = detect_change_points(dist, method=self.method, cfg=cfg, penalty=self.penalty,
                                      prune_k_cap=self.prune_k_cap,
                                      rng=np.random.default_rng(self.random_state))
        self.result_ = result
        self.candidates_ = result.candidates
        self.trace_ = result.trace
        self.dendrogram_ = result.dendrogram
        self.change_points_ = np.asarray(result.change_points, dtype=int)
        self.labels_ = segment_labels(self.change_points_, dist.n)
        return self

    def score(self, X=None, y=None):
        """ep-BIC of the selected change-point set."""
        check_is_fitted(self, "trace_")
        return self.trace_.ep_bic[self.trace_.chosen_m]


def segment_labels(change_points, n):
    """Segment index ``0..m`` of each of ``n`` observations."""
    labels = np.zeros(n, dtype=int)
    for t in change_points:
        labels[int(t):] += 1
    return labels
