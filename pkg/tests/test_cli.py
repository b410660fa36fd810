import json
import re

import jsonschema
import numpy as np
import pytest

from gmulti.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main
from gmulti.exceptions import InvalidData
from gmulti.io import canonical_json, parse_input, validate_report
from gmulti.prune import LocalStatistic, ep_bic, expanded_adjacent_sum
from gmulti.simgraph import pairwise_distances

FAST = ["-B", "199", "-L", "30"]


@pytest.fixture
def shifted_csv(tmp_path):
    rng = np.random.default_rng(5)
    x = np.vstack([rng.normal(0, 1, (40, 4)), rng.normal(2.5, 1, (40, 4)), rng.normal(0, 1, (40, 4))])
    path = tmp_path / "x.csv"
    np.savetxt(path, x, delimiter=",", header="a,b,c,d", comments="")
    return path, x


def test_parse_matrix(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("0,0\n1,0\n0,1\n")
    x = parse_input(p, "csv_matrix")
    assert x.shape == (3, 2)
    p.write_text("u,v\n0,0\n1,0\n")
    assert parse_input(p).shape == (2, 2)


@pytest.mark.parametrize("text, pattern", [
    ("", "empty"),
    ("1,2\n3\n", "row 1"),
    ("1,2\n3,x\n", "row 1, column 1"),
    ("1,2\n3,nan\n", "row 1, column 1"),
])
def test_parse_matrix_errors(tmp_path, text, pattern):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(InvalidData, match=pattern):
        parse_input(p)


def test_parse_distance(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1,2\n1,0,1\n2,1,0\n")
    assert parse_input(p, "csv_distance").n == 3
    p.write_text("0,1,2\n1.5,0,1\n2,1,0\n")
    with pytest.raises(InvalidData, match=r"\(0, ?1\)"):
        parse_input(p, "csv_distance")
    p.write_text("0,1\n1,0\n2,2\n")
    with pytest.raises(InvalidData, match="square"):
        parse_input(p, "csv_distance")


def _detect(tmp_path, path, *extra):
    out = tmp_path / "r.json"
    rc = main(["detect", str(path), "-o", str(out), *FAST, *extra])
    return rc, out


def test_detect_report(tmp_path, shifted_csv):
    path, x = shifted_csv
    rc, out = _detect(tmp_path, path, "--seed", "1")
    assert rc == EXIT_OK
    rep = validate_report(json.loads(out.read_text()))
    assert rep["schema"] == 1
    assert rep["change_points"] == [40, 80]
    cands = [c["point"] for c in rep["candidates"]]
    assert set(rep["change_points"]) <= set(cands)
    # trace values match a recomputation from the data
    local = LocalStatistic(pairwise_distances(x))
    for step in rep["elimination"]:
        eas = expanded_adjacent_sum(None, step["set"], local=local)
        assert step["ep_bic"] == pytest.approx(ep_bic(eas, step["m"], len(x)))
    assert rep["config"]["seed"] == 1 and rep["config"]["alpha"] == 0.01


def test_detect_canonical_determinism(tmp_path, shifted_csv):
    path, _ = shifted_csv
    _, a = _detect(tmp_path, path, "--method", "sbs")
    first = json.loads(a.read_text())
    _, b = _detect(tmp_path, path, "--method", "sbs")
    second = json.loads(b.read_text())
    assert canonical_json(first) == canonical_json(second)
    assert "runtime" in first


def test_constant_input_gives_no_change(tmp_path):
    p = tmp_path / "c.csv"
    np.savetxt(p, np.ones((40, 3)), delimiter=",")
    rc, out = _detect(tmp_path, p)
    assert rc == EXIT_OK and json.loads(out.read_text())["change_points"] == []


def test_distance_input(tmp_path, shifted_csv):
    _, x = shifted_csv
    p = tmp_path / "d.csv"
    np.savetxt(p, pairwise_distances(x).d, delimiter=",", fmt="%.17g")
    rc, out = _detect(tmp_path, p, "--format", "csv_distance", "--seed", "1")
    assert rc == EXIT_OK and json.loads(out.read_text())["change_points"] == [40, 80]


@pytest.mark.parametrize("args, code", [
    (["--alpha", "1.5"], EXIT_CONFIG),
    (["--min-len", "2"], EXIT_CONFIG),
    (["--penalty", "0"], EXIT_CONFIG),
    (["--method", "pelt"], EXIT_CONFIG),
    (["--min-len", "500"], EXIT_INPUT),
])
def test_detect_exit_codes(tmp_path, shifted_csv, args, code):
    path, _ = shifted_csv
    assert main(["detect", str(path), *args]) == code


def test_detect_input_errors(tmp_path, capsys):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n")
    assert main(["detect", str(p)]) == EXIT_INPUT
    assert "row 1" in capsys.readouterr().err
    p.write_text("")
    assert main(["detect", str(p)]) == EXIT_INPUT
    assert main(["detect", str(tmp_path / "missing.csv")]) == EXIT_INPUT


def test_unwritable_output(tmp_path, shifted_csv):
    path, _ = shifted_csv
    bad = str(tmp_path / "nope" / "d.svg")
    assert main(["detect", str(path), *FAST, "-o", str(tmp_path / "r.json"),
                 "--dendrogram-svg", bad]) == EXIT_INPUT


def test_dendrogram_outputs_agree(tmp_path, shifted_csv):
    path, _ = shifted_csv
    svg, tree = tmp_path / "d.svg", tmp_path / "d.json"
    rc, out = _detect(tmp_path, path, "--dendrogram-svg", str(svg), "--dendrogram-json", str(tree))
    assert rc == EXIT_OK
    rep = json.loads(out.read_text())
    assert json.loads(tree.read_text()) == rep["dendrogram"]
    svg2 = tmp_path / "d2.svg"
    assert main(["dendrogram", str(out), "--svg", str(svg2)]) == EXIT_OK
    assert svg2.read_text() == svg.read_text()
    text = svg.read_text()
    svg_h = sorted(float(h) for h in re.findall(r'data-height="([^"]+)"', text))
    assert svg_h == sorted(_tree_heights(rep["dendrogram"]["root"]))


def _tree_heights(node):
    out = [node["height"]]
    for ch in node.get("children", []):
        out += _tree_heights(ch)
    return out


def test_dendrogram_bad_report(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    assert main(["dendrogram", str(p), "--svg", str(tmp_path / "o.svg")]) == EXIT_INPUT


def test_schema_rejects_bad_report(tmp_path, shifted_csv):
    path, _ = shifted_csv
    _, out = _detect(tmp_path, path)
    rep = json.loads(out.read_text())
    rep["schema"] = 2
    with pytest.raises(jsonschema.ValidationError):
        validate_report(rep)


def test_benchmark_command(tmp_path, monkeypatch):
    monkeypatch.setenv("GMULTI_THREADS", "1")
    out_csv, out_json = tmp_path / "b.csv", tmp_path / "b.json"
    rc = main(["benchmark", "--models", "1", "-d", "20", "--reps", "2", "--method", "sbs",
               "-B", "99", "--csv", str(out_csv), "--json", str(out_json)])
    assert rc == EXIT_OK
    header = out_csv.read_text().splitlines()[0]
    assert header == "model_id,d,method,reps,mean_true,sd_true,mean_false,sd_false,wall_ms"
    assert json.loads(out_json.read_text())["rows"][0]["reps"] == 2
    assert main(["benchmark", "--models", "5", "-d", "37"]) == EXIT_CONFIG
    assert main(["benchmark", "--models", "x"]) == EXIT_CONFIG
    monkeypatch.setenv("GMULTI_THREADS", "-1")
    assert main(["benchmark", "--models", "1", "-d", "20", "--reps", "1"]) == EXIT_CONFIG
