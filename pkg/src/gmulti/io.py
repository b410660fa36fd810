"""Input parsing, detection reports and dendrogram rendering."""

import csv
from importlib import resources
import json
from xml.sax.saxutils import escape

import jsonschema
import numpy as np

from .exceptions import InvalidData
from .simgraph import DistanceMatrix

SCHEMA_VERSION = 1
FORMATS = ("csv_matrix", "csv_distance")
_VOLATILE = ("runtime",)


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InvalidData(f"cannot read {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise InvalidData(f"{path} is not a text file") from exc
    if not rows:
        raise InvalidData(f"{path} is empty")
    return rows


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _to_matrix(rows, path, header):
    start = 1 if header else 0
    width = len(rows[0])
    out = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:], start=start):
        if len(row) != width:
            raise InvalidData(f"{path}: row {i} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i - start, j] = float(cell)
            except ValueError:
                raise InvalidData(f"{path}: non-numeric cell {cell!r} at row {i}, column {j}") from None
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise InvalidData(f"{path}: non-finite value at row {i + start}, column {j}")
    return out


def parse_input(path, format="csv_matrix"):
    """Read observations or a distance matrix from CSV.

    ``csv_matrix`` holds ``n`` rows of ``d`` numeric columns, optionally below a
    header row. ``csv_distance`` holds an ``n x n`` symmetric matrix with a zero
    diagonal (no header). Row and column numbers in error messages are 0-based
    over the file's data rows.

    Returns
    -------
    ndarray of shape (n, d) or DistanceMatrix
    """
    if format not in FORMATS:
        raise InvalidData(f"unknown input format {format!r}; expected one of {FORMATS}")
    rows = _read_rows(path)
    if format == "csv_matrix":
        header = not all(_is_number(c) for c in rows[0])
        data = _to_matrix(rows, path, header)
        if data.shape[0] == 0:
            raise InvalidData(f"{path} has a header but no data rows")
        return data
    data = _to_matrix(rows, path, header=False)
    if data.shape[0] != data.shape[1]:
        raise InvalidData(f"{path}: distance matrix is {data.shape[0]}x{data.shape[1]}, not square")
    try:
        return DistanceMatrix(data).validate()
    except InvalidData as exc:
        raise InvalidData(f"{path}: {exc}") from None


def _schema():
    text = resources.files("gmulti").joinpath("report.schema.json").read_text()
    return json.loads(text)


def validate_report(report):
    """Raise ``jsonschema.ValidationError`` unless ``report`` matches the schema."""
    jsonschema.validate(report, _schema())
    return report


def build_report(result, n, config, runtime=None):
    """JSON-ready report of a :class:`~gmulti.detector.DetectionResult`."""
    trace = result.trace
    cands = result.candidates
    m0 = len(trace.sets) - 1
    return {
        "schema": SCHEMA_VERSION,
        "n": int(n),
        "change_points": [int(t) for t in trace.tau_hat],
        "candidates": [
            {"point": int(t), "interval": list(map(int, p.interval)), "p_value": float(p.p_value),
             "s_max": float(p.s_max), "parent": list(map(int, p.parent))}
            for t, p in sorted(cands.provenance.items())
        ],
        "elimination": [
            {"m": m, "ep_bic": float(trace.ep_bic[m]), "set": [int(t) for t in trace.sets[m]],
             "removed": None if trace.removed[m] is None else int(trace.removed[m])}
            for m in range(m0, -1, -1)
        ],
        "chosen_m": int(trace.chosen_m),
        "dendrogram": result.dendrogram.to_dict(),
        "warnings": sorted(set(trace.warnings)),
        "config": config,
        "runtime": runtime or {},
    }


def canonical_json(report):
    """Serialised report without run-dependent fields, for comparing runs."""
    stable = {k: v for k, v in report.items() if k not in _VOLATILE}
    return json.dumps(stable, sort_keys=True, separators=(",", ":"))


def _layout(dendro):
    """x position of every node: leaves evenly spaced, parents centred on children."""
    xs = {}
    for i, leaf in enumerate(dendro.leaves):
        xs[id(leaf)] = float(i)
    for node in dendro.merges:
        xs[id(node)] = 0.5 * (xs[id(node.children[0])] + xs[id(node.children[1])])
    return xs


def dendrogram_svg(dendro, width=800, height=480, margin=60):
    """Render a change-point dendrogram as a standalone SVG document.

    Segments run along the x-axis in time order; the y-axis is ``-ep-BIC``.
    Every leaf and merge carries its exact height in a ``data-height``
    attribute.
    """
    leaves, merges = dendro.leaves, dendro.merges
    heights = [leaf.height for leaf in leaves] + [m.height for m in merges]
    lo, hi = min(heights), max(heights)
    span = hi - lo if hi > lo else 1.0
    xs = _layout(dendro)
    n_leaves = len(leaves)
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin

    def px(x):
        return margin + (plot_w * (x + 0.5) / n_leaves)

    def py(h):
        return height - margin - plot_h * (h - lo) / span

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<line class="axis" x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="#000"/>',
           f'<line class="axis" x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
           f'y2="{height - margin}" stroke="#000"/>',
           f'<text x="{margin / 3:.1f}" y="{height / 2:.1f}" transform="rotate(-90 {margin / 3:.1f} '
           f'{height / 2:.1f})" text-anchor="middle">-ep-BIC</text>']
    for tick in np.linspace(lo, hi, 5) if hi > lo else [lo]:
        y = py(tick)
        out.append(f'<line x1="{margin - 4}" y1="{y:.2f}" x2="{margin}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{margin - 6}" y="{y + 4:.2f}" text-anchor="end">{tick:.4g}</text>')
    for leaf in leaves:
        x, y = px(xs[id(leaf)]), py(leaf.height)
        label = f"{leaf.segment[0]}-{leaf.segment[1]}"
        out.append(f'<g class="leaf" data-segment="{label}" data-height="{leaf.height!r}">'
                   f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3"/>'
                   f'<text x="{x:.2f}" y="{height - margin + 16}" text-anchor="middle">'
                   f'{escape(label)}</text></g>')
    for node in merges:
        left, right = node.children
        xl, xr = px(xs[id(left)]), px(xs[id(right)])
        yl, yr, y = py(left.height), py(right.height), py(node.height)
        out.append(f'<g class="merge" data-removed="{node.removed_point}" data-height="{node.height!r}">'
                   f'<path d="M{xl:.2f},{yl:.2f} V{y:.2f} H{xr:.2f} V{yr:.2f}" fill="none" '
                   f'stroke="#1f77b4" stroke-width="1.5"/>'
                   f'<text x="{0.5 * (xl + xr):.2f}" y="{y - 4:.2f}" text-anchor="middle">'
                   f'{node.removed_point}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InvalidData(f"cannot write {path}: {exc.strerror or exc}") from exc

