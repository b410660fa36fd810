"""Synthetic sequences with known change-points and a benchmark runner.

Models 1-4 are the penalty-calibration settings, Models 5-8 the Euclidean
comparison settings and Model 9 a sequence of configuration-model networks.
Segment layouts are fixed per model; ``true_taus`` lists the last index of
every segment but the final one.
"""

from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
import os
import time

import numpy as np

from .exceptions import ConfigError

# (delta, sigma) per dimension
MODEL5_PARAMS = {20: (0.6, 1.85), 50: (0.45, 1.75), 100: (0.37, 1.55), 500: (0.1, 1.4),
                 1000: (0.05, 1.35)}
MODEL6_DELTA = {20: 1.1, 50: 0.85, 100: 0.76, 500: 0.64, 1000: 0.6}
MODEL7_SIGMA = {20: 1.9, 50: 1.65, 100: 1.45, 500: 1.2, 1000: 1.15}

# inclusive 1-based segment bounds
LAYOUTS = {
    1: [(1, 20), (21, 40), (41, 60), (61, 80), (81, 100), (101, 120)],
    2: [(1, 30), (31, 60), (61, 90), (91, 120), (121, 150), (151, 180)],
    3: [(1, 50), (51, 100), (101, 150), (151, 200), (201, 250), (251, 300)],
    4: [(1, 40), (41, 80), (81, 120), (121, 160), (161, 200), (201, 240)],
    5: [(1, 50), (51, 100), (101, 150), (151, 200), (201, 250), (251, 300)],
    6: [(1, 40), (41, 90), (91, 145), (146, 190), (191, 255), (256, 300)],
    7: [(1, 55), (56, 90), (91, 140), (141, 195), (196, 255), (256, 300)],
    8: [(1, 50), (51, 65), (66, 110), (111, 160), (161, 185), (186, 260)],
    9: [(1, 30), (31, 70), (71, 115), (116, 150), (151, 205), (206, 240)],
}

CSV_COLUMNS = ["model_id", "d", "method", "reps", "mean_true", "sd_true", "mean_false",
               "sd_false", "wall_ms"]


@dataclass(frozen=True)
class ModelSpec:
    """One simulation setting.

    ``d`` is the dimension, or the number of network nodes for Model 9. For
    Models 5-7, ``delta``/``sigma`` default to the tabulated values for
    ``d`` in ``{20, 50, 100, 500, 1000}`` and must be given otherwise.
    """

    model_id: int
    d: int
    delta: float = None
    sigma: float = None

    def resolved(self):
        """Copy with ``delta`` and ``sigma`` filled in; raises ConfigError if impossible."""
        if self.model_id not in LAYOUTS:
            raise ConfigError(f"model_id must be in 1..9, got {self.model_id}")
        min_d = 4 if self.model_id == 9 else 2
        if self.d < min_d:
            raise ConfigError(f"model {self.model_id} needs d >= {min_d}, got {self.d}")
        delta, sigma = self.delta, self.sigma
        if self.model_id == 5:
            tab = MODEL5_PARAMS.get(self.d, (None, None))
            delta = tab[0] if delta is None else delta
            sigma = tab[1] if sigma is None else sigma
        elif self.model_id == 6 and delta is None:
            delta = MODEL6_DELTA.get(self.d)
        elif self.model_id == 7 and sigma is None:
            sigma = MODEL7_SIGMA.get(self.d)
        if self.model_id in (5, 6) and delta is None:
            raise ConfigError(f"model {self.model_id} with d={self.d} needs an explicit delta")
        if self.model_id in (5, 7) and (sigma is None or sigma <= 0):
            raise ConfigError(f"model {self.model_id} with d={self.d} needs a positive sigma")
        return ModelSpec(self.model_id, self.d, delta, sigma)


@dataclass
class LabeledSequence:
    """Observations in rows with their true change-points."""

    data: np.ndarray
    true_taus: list
    model_id: int = None

    @property
    def n(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class DetectionScore:
    true_detected: int
    false_detected: int


def ar1_cov(d, rho):
    """``Sigma[j, k] = rho ** |j - k|``."""
    idx = np.arange(d)
    return rho ** np.abs(np.subtract.outer(idx, idx))


def _normal(rng, size, mean, chol, scale=1.0):
    z = rng.standard_normal((size, chol.shape[0]))
    return mean + math.sqrt(scale) * z @ chol.T


def _cauchy(rng, size, mean, chol, scale=1.0):
    # multivariate t with one degree of freedom
    z = rng.standard_normal((size, chol.shape[0]))
    w = np.abs(rng.standard_normal((size, 1)))
    return mean + math.sqrt(scale) * (z @ chol.T) / w


def _sparse_theta(d):
    theta = np.zeros(d)
    theta[:max(d // 5, 1)] = 1.0
    return theta


def _taus(layout):
    return [end for _, end in layout[:-1]]


def generate(spec, rng=None):
    """Draw one sequence from ``spec``.

    Returns
    -------
    LabeledSequence
        For Model 9 each row is the vectorised upper triangle of a network's
        adjacency matrix.
    """
    spec = spec.resolved()
    rng = np.random.default_rng(rng)
    d = spec.d
    layout = LAYOUTS[spec.model_id]
    eye = np.eye(d)
    ones = np.ones(d)
    logd = math.log(d)
    mid = spec.model_id

    if mid == 9:
        rows = []
        for j, (lo, hi) in enumerate(layout):
            degrees = np.full(d, 2)
            if j % 2 == 1:
                degrees[:4] = 4
            rows.extend(gen_configuration_network(degrees, rng) for _ in range(hi - lo + 1))
        return LabeledSequence(np.asarray(rows, dtype=float), _taus(layout), mid)

    sig3 = np.linalg.cholesky(ar1_cov(d, 0.3))
    if mid == 8:
        sig8 = np.linalg.cholesky(ar1_cov(d, 0.8))
        theta = _sparse_theta(d)
        makers = [
            lambda k: _cauchy(rng, k, 0.0, eye),
            lambda k: _normal(rng, k, 7.0 / logd * theta, sig8),
            lambda k: _cauchy(rng, k, 0.0, eye, scale=2.0),
            lambda k: _normal(rng, k, -5.0 / (2.0 * logd) * theta, eye),
            lambda k: _normal(rng, k, 2.0 / logd * theta, sig8),
            lambda k: rng.exponential(1.0, size=(k, d)) - 1.0,
        ]
    else:
        if mid == 1:
            pair = (lambda k: _normal(rng, k, 0.0, eye),
                    lambda k: _normal(rng, k, 5.0 / (4.0 * logd) * ones, eye))
        elif mid == 2:
            pair = (lambda k: _normal(rng, k, 0.0, eye),
                    lambda k: _normal(rng, k, 0.0, eye, scale=1.0 + 2.0 / math.sqrt(d)))
        elif mid == 3:
            pair = (lambda k: _cauchy(rng, k, 0.0, eye),
                    lambda k: _cauchy(rng, k, 7.0 / (4.0 * logd) * ones, eye))
        elif mid == 4:
            pair = (lambda k: _normal(rng, k, 0.0, sig3),
                    lambda k: _normal(rng, k, 1.0 / logd * ones, eye))
        elif mid == 5:
            pair = (lambda k: _normal(rng, k, 0.0, sig3),
                    lambda k: _normal(rng, k, spec.delta * _sparse_theta(d), sig3, scale=spec.sigma))
        elif mid == 6:
            pair = (lambda k: _cauchy(rng, k, 0.0, eye),
                    lambda k: _cauchy(rng, k, spec.delta * _sparse_theta(d), sig3))
        else:
            pair = (lambda k: _normal(rng, k, 0.0, eye),
                    lambda k: _normal(rng, k, 0.0, sig3, scale=spec.sigma))
        makers = [pair[j % 2] for j in range(len(layout))]

    blocks = [make(hi - lo + 1) for make, (lo, hi) in zip(makers, layout)]
    return LabeledSequence(np.vstack(blocks), _taus(layout), mid)


def toy_sequence(rng=None, d=100):
    """Four-segment illustration: changes at 90, 230 and 320 in 400 observations.

    Segments one and three are ``N(0, (sqrt(6)/2) Sigma)``, two and four are
    ``N(0.6 theta, Sigma)`` with ``theta`` ones in the first 20 coordinates and
    ``Sigma`` the AR(1) matrix with ``rho = 0.3``.
    """
    rng = np.random.default_rng(rng)
    chol = np.linalg.cholesky(ar1_cov(d, 0.3))
    theta = np.zeros(d)
    theta[:min(20, d)] = 1.0
    layout = [(1, 90), (91, 230), (231, 320), (321, 400)]
    blocks = []
    for j, (lo, hi) in enumerate(layout):
        k = hi - lo + 1
        if j % 2 == 0:
            blocks.append(_normal(rng, k, 0.0, chol, scale=math.sqrt(6) / 2))
        else:
            blocks.append(_normal(rng, k, 0.6 * theta, chol))
    return LabeledSequence(np.vstack(blocks), _taus(layout))


def gen_configuration_network(degree_seq, rng=None):
    """Configuration-model network as a 0/1 upper-triangular adjacency vector.

    Half-edges are paired uniformly at random; self-loops are dropped and
    parallel edges collapsed. Entry order follows ``numpy.triu_indices(p, 1)``.
    """
    degrees = np.asarray(degree_seq, dtype=int)
    if np.any(degrees < 0):
        raise ConfigError("degrees must be nonnegative")
    if degrees.sum() % 2:
        raise ConfigError(f"degree sum must be even, got {degrees.sum()}")
    rng = np.random.default_rng(rng)
    p = degrees.size
    stubs = rng.permutation(np.repeat(np.arange(p), degrees))
    u, v = stubs[0::2], stubs[1::2]
    keep = u != v
    u, v = np.minimum(u[keep], v[keep]), np.maximum(u[keep], v[keep])
    adj = np.zeros((p, p), dtype=np.int8)
    adj[u, v] = 1
    return adj[np.triu_indices(p, 1)]


def detection_metrics(tau_hat, tau_true, tol=2):
    """Count true detections with one-to-one greedy matching within ``tol``.

    True points are visited in increasing order; each takes the smallest
    still-unmatched estimate within ``tol`` of it.
    """
    est = sorted(int(t) for t in tau_hat)
    used = [False] * len(est)
    hits = 0
    for t in sorted(int(x) for x in tau_true):
        for i, e in enumerate(est):
            if not used[i] and abs(e - t) <= tol:
                used[i] = True
                hits += 1
                break
    return DetectionScore(true_detected=hits, false_detected=len(est) - hits)


def _rep_rng(seed, model_index, rep):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(model_index, rep)))


def _run_one(spec, method, seed, model_index, rep, detector_params):
    from .detector import detect_change_points
    from .segment import SearchConfig
    from .simgraph import pairwise_distances

    rng = _rep_rng(seed, model_index, rep)
    seq = generate(spec, rng)
    params = dict(detector_params)
    penalty = params.pop("penalty", 2.0)
    prune_k_cap = params.pop("prune_k_cap", 5)
    cfg = SearchConfig(**params)
    t0 = time.perf_counter()
    result = detect_change_points(pairwise_distances(seq.data), method=method, cfg=cfg,
                                  penalty=penalty, prune_k_cap=prune_k_cap, rng=rng)
    elapsed = time.perf_counter() - t0
    score = detection_metrics(result.change_points, seq.true_taus)
    return score, elapsed, result.change_points


@dataclass
class BenchmarkRow:
    model_id: int
    d: int
    method: str
    reps: int
    mean_true: float
    sd_true: float
    mean_false: float
    sd_false: float
    wall_ms: float
    estimates: list = field(default_factory=list, repr=False)


def worker_count():
    """Worker cap from ``GMULTI_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("GMULTI_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GMULTI_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ConfigError(f"GMULTI_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def run_benchmark(models, method="wbs", reps=100, seed=0, n_jobs=None, **detector_params):
    """Detection accuracy per model over ``reps`` replications.

    Replication ``r`` of the ``i``-th model draws its data and permutations from
    ``SeedSequence(seed, spawn_key=(i, r))``, so results do not depend on the
    number of workers. Extra keyword arguments go to :class:`SearchConfig`
    (plus ``penalty`` and ``prune_k_cap``).

    Returns
    -------
    list of BenchmarkRow
        Standard deviations use ``ddof=1`` (0 when ``reps == 1``).
    """
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    if method not in ("wbs", "sbs"):
        raise ConfigError(f"method must be 'wbs' or 'sbs', got {method!r}")
    n_jobs = worker_count() if n_jobs is None else n_jobs
    rows = []
    for i, spec in enumerate(models):
        spec = spec.resolved()
        tasks = [(spec, method, seed, i, r, detector_params) for r in range(reps)]
        if n_jobs > 1 and reps > 1:
            from joblib import Parallel, delayed
            out = Parallel(n_jobs=n_jobs)(delayed(_run_one)(*t) for t in tasks)
        else:
            out = [_run_one(*t) for t in tasks]
        trues = np.array([s.true_detected for s, _, _ in out], dtype=float)
        falses = np.array([s.false_detected for s, _, _ in out], dtype=float)
        ddof = 1 if reps > 1 else 0
        rows.append(BenchmarkRow(
            model_id=spec.model_id, d=spec.d, method=method, reps=reps,
            mean_true=float(trues.mean()), sd_true=float(trues.std(ddof=ddof)),
            mean_false=float(falses.mean()), sd_false=float(falses.std(ddof=ddof)),
            wall_ms=1000.0 * sum(e for _, e, _ in out) / reps,
            estimates=[list(cp) for _, _, cp in out]))
    return rows


def report_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: getattr(row, k) for k in CSV_COLUMNS})
    return buf.getvalue()


def report_json(rows, canonical=False):
    """JSON report; ``canonical=True`` drops the timing field."""
    out = []
    for row in rows:
        item = asdict(row)
        if canonical:
            item.pop("wall_ms")
        out.append(item)
    return json.dumps({"schema": 1, "rows": out}, indent=2, sort_keys=True)
