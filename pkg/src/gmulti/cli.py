"""Command-line front end.

Exit codes: 0 success (including an empty change-point set), 2 input or
output error, 3 invalid configuration.
"""

import argparse
import datetime
import json
import math
import sys
import time

from . import io as gio
from .detector import METHODS, detect_change_points
from .exceptions import ConfigError, InvalidData
from .prune import DEFAULT_PENALTY, Dendrogram
from .segment import SearchConfig
from .simgraph import METRICS, pairwise_distances
from .simlab import ModelSpec, report_csv, report_json, run_benchmark, worker_count

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to the configuration exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _search_flags(p):
    p.add_argument("--method", choices=METHODS, default="wbs")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("-L", "--n-intervals", type=int, default=100, help="random intervals per step (wbs)")
    p.add_argument("--gamma", type=float, default=math.sqrt(0.5), help="seeded interval decay (sbs)")
    p.add_argument("--min-len", type=int, default=10)
    p.add_argument("-c", "--penalty", type=float, default=DEFAULT_PENALTY, help="ep-BIC penalty constant")
    p.add_argument("-B", "--permutations", type=int, default=999)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trim", type=float, default=0.1)
    p.add_argument("--search-k-cap", type=int, default=30)
    p.add_argument("--prune-k-cap", type=int, default=5)


def build_parser():
    parser = _Parser(prog="gmulti", description="Graph-based multiple change-point detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    det = sub.add_parser("detect", help="detect change-points in a CSV sequence")
    det.add_argument("input")
    det.add_argument("--format", choices=gio.FORMATS, default="csv_matrix")
    det.add_argument("--metric", choices=METRICS, default="euclidean")
    _search_flags(det)
    det.add_argument("-o", "--output", help="report JSON path (default: stdout)")
    det.add_argument("--dendrogram-svg")
    det.add_argument("--dendrogram-json")

    bench = sub.add_parser("benchmark", help="run simulation models and score detections")
    bench.add_argument("--models", default="5", help="comma-separated model ids 1-9")
    bench.add_argument("-d", "--dim", type=int, default=100, help="dimension (nodes for model 9)")
    bench.add_argument("--reps", type=int, default=10)
    _search_flags(bench)
    bench.add_argument("--csv", help="CSV output path (default: stdout)")
    bench.add_argument("--json", help="JSON output path")

    den = sub.add_parser("dendrogram", help="render the dendrogram stored in a report")
    den.add_argument("report")
    den.add_argument("--svg", required=True)
    den.add_argument("--json", help="also write the dendrogram JSON tree")
    return parser


def _config(args):
    cfg = SearchConfig(alpha=args.alpha, n_intervals=args.n_intervals, gamma=args.gamma,
                       min_len=args.min_len, n_permutations=args.permutations, seed=args.seed,
                       trim=args.trim, k_cap=args.search_k_cap).validate()
    if not args.penalty > 0:
        raise ConfigError(f"--penalty must be > 0, got {args.penalty}")
    if args.prune_k_cap < 1:
        raise ConfigError(f"--prune-k-cap must be >= 1, got {args.prune_k_cap}")
    return cfg


def _echo(args):
    keys = ("method", "alpha", "n_intervals", "gamma", "min_len", "penalty", "permutations",
            "seed", "trim", "search_k_cap", "prune_k_cap")
    return {k: getattr(args, k) for k in keys}


def _write_dendrogram(dendro, svg=None, tree=None):
    if svg:
        gio.write_text(svg, gio.dendrogram_svg(dendro))
    if tree:
        gio.write_text(tree, json.dumps(dendro.to_dict(), indent=2) + "\n")


def run_detect(args):
    cfg = _config(args)
    data = gio.parse_input(args.input, args.format)
    if args.format == "csv_matrix":
        dist = pairwise_distances(data, args.metric)
    else:
        dist = data
    if dist.n < cfg.min_len:
        raise InvalidData(f"sequence of length {dist.n} is shorter than --min-len {cfg.min_len}")
    t0 = time.perf_counter()
    result = detect_change_points(dist, method=args.method, cfg=cfg, penalty=args.penalty,
                                  prune_k_cap=args.prune_k_cap)
    runtime = {"wall_seconds": time.perf_counter() - t0,
               "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    config = {"input": args.input, "format": args.format, "metric": args.metric, **_echo(args)}
    report = gio.validate_report(gio.build_report(result, dist.n, config, runtime))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.output:
        gio.write_text(args.output, text)
    else:
        sys.stdout.write(text)
    _write_dendrogram(result.dendrogram, args.dendrogram_svg, args.dendrogram_json)
    return EXIT_OK


def run_benchmark_cmd(args):
    _config(args)
    try:
        ids = [int(x) for x in args.models.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--models must be comma-separated integers, got {args.models!r}")
    models = [ModelSpec(i, args.dim).resolved() for i in ids]
    rows = run_benchmark(models, method=args.method, reps=args.reps, seed=args.seed,
                         n_jobs=worker_count(), alpha=args.alpha, n_intervals=args.n_intervals,
                         gamma=args.gamma, min_len=args.min_len,
                         n_permutations=args.permutations, trim=args.trim,
                         k_cap=args.search_k_cap, penalty=args.penalty,
                         prune_k_cap=args.prune_k_cap)
    text = report_csv(rows)
    if args.csv:
        gio.write_text(args.csv, text)
    else:
        sys.stdout.write(text)
    if args.json:
        gio.write_text(args.json, report_json(rows) + "\n")
    return EXIT_OK


def run_dendrogram(args):
    try:
        with open(args.report) as fh:
            report = json.load(fh)
        dendro = Dendrogram.from_dict(report["dendrogram"])
    except OSError as exc:
        raise InvalidData(f"cannot read {args.report}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidData(f"{args.report} does not hold a dendrogram: {exc}") from exc
    _write_dendrogram(dendro, args.svg, args.json)
    return EXIT_OK


_COMMANDS = {"detect": run_detect, "benchmark": run_benchmark_cmd, "dendrogram": run_dendrogram}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit with EXIT_CONFIG, --help with 0
        return exc.code
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"gmulti: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidData as exc:
        print(f"gmulti: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
