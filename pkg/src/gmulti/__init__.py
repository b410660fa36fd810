"""Graph-based multiple change-point detection for multivariate and non-Euclidean sequences."""

from .detector import DetectionResult, GraphChangePointDetector, detect_change_points, segment_labels
from .edgecount import (
    EdgeCountProfile, NullMoments, ScanResult, WindowScanner, edge_count_profile,
    generalized_stat, permutation_moments, permutation_pvalue, scan_range, scan_window,
)
from .exceptions import ConfigError, EmptyCandidates, GMultiError, InvalidData, InvalidWindow, WindowTooShort
from .io import build_report, canonical_json, dendrogram_svg, parse_input, validate_report
from .prune import (
    Dendrogram, DendrogramNode, EliminationTrace, LocalStatistic, adjacent_sum, backward_eliminate,
    boundary_set, build_dendrogram, ep_bic, expanded_adjacent_sum, pseudo_bic,
)
from .segment import CandidateSet, Interval, Provenance, SearchConfig, gsbs, gwbs, sample_intervals, seeded_intervals
from .simgraph import DistanceMatrix, GraphStats, SimilarityGraph, build_kmst, default_k, graph_stats, pairwise_distances
from .simlab import ModelSpec, detection_metrics, gen_configuration_network, generate, run_benchmark, toy_sequence

__version__ = "0.1.0"
