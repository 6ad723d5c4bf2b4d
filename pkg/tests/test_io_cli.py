import json
import re
import subprocess
import sys

import numpy as np
import pytest

from sobocurve import io
from sobocurve.cli import run
from sobocurve.curves import Diffeo, circle, ellipse
from sobocurve.geodesics import CurvePath

SAMPLE_METRIC = "n=2,a0=1,a2=1"


@pytest.fixture
def files(tmp_path):
    c, e = circle(32), ellipse(32)
    paths = {}
    for name, obj in (("circle", c), ("ellipse", e)):
        p = tmp_path / f"{name}.json"
        io.write_json(io.curve_to_dict(obj), p)
        paths[name] = p
    bump = tmp_path / "field.json"
    io.write_json({"samples": 0.1 * np.stack([np.cos(2 * c.theta), np.sin(3 * c.theta)], 1)}, bump)
    paths["field"] = bump
    fig8 = tmp_path / "fig8.json"
    io.write_json({"samples": np.stack([np.sin(2 * c.theta), np.sin(c.theta)], 1)}, fig8)
    paths["fig8"] = fig8
    paths["dir"] = tmp_path
    return paths


# -- formats -----------------------------------------------------------------------------------


def test_canonical_json_roundtrip(tmp_path):
    c = ellipse(64)
    text = io.dumps(io.curve_to_dict(c))
    assert text.endswith("\n") and "\n" not in text[:-1]
    back = io.curve_from_dict(json.loads(text))
    assert np.array_equal(back.samples, c.samples)
    f = tmp_path / "c.json"
    f.write_text(text)
    assert io.dumps(io.curve_to_dict(io.load_curve(f))) == text
    assert io.dumps({"b": 1, "a": [0.1, True, None]}) == '{"b":1,"a":[0.10000000000000001,true,null]}\n'


def test_path_and_diffeo_json():
    p = CurvePath.from_samples([circle(16).samples, 2 * circle(16).samples])
    d = json.loads(io.dumps(io.path_to_dict(p)))
    assert list(d) == ["times", "curves"]
    q = io.path_from_dict(d)
    assert np.array_equal(q.samples(), p.samples())
    phi = Diffeo.rotation(16, 0.4)
    dd = json.loads(io.dumps(io.diffeo_to_dict(phi)))
    assert list(dd) == ["knots", "shift"]
    assert np.array_equal(io.diffeo_from_dict(dd).knots, phi.knots)


def test_bad_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(io.InputFormatError):
        io.load_curve(bad)
    bad.write_text('{"dim": 3, "samples": [[0, 1], [1, 0]]}')
    with pytest.raises(io.InputFormatError):
        io.load_curve(bad)
    with pytest.raises(io.InputFormatError):
        io.path_from_dict({"curves": []})


def test_csv_roundtrip(tmp_path):
    c = ellipse(32)
    f = tmp_path / "c.csv"
    f.write_text(io.to_csv(c))
    assert f.read_text().splitlines()[0] == "x0,x1"
    assert np.array_equal(io.load_curve(f).samples, c.samples)
    p = CurvePath.from_samples([c.samples, c.samples + 1])
    rows = io.to_csv(p).splitlines()
    assert rows[0] == "knot,time,x0,x1" and len(rows) == 1 + 2 * 32


def _polylines(svg):
    return re.findall(r'<polyline[^>]*stroke-opacity="([0-9.]+)"[^>]*points="([^"]+)"', svg)


def test_svg_circle():
    svg = io.export_svg(circle(64))
    lines = _polylines(svg)
    assert len(lines) == 1
    pts = lines[0][1].split()
    assert len(pts) == 65 and pts[0] == pts[-1] and len(set(pts)) == 64  # 64 samples, closed
    assert svg == io.export_svg(circle(64))


def test_svg_path_graded():
    X = [circle(32, radius=1 + t / 16).samples for t in range(17)]
    svg = io.export_svg(CurvePath.from_samples(X))
    ops = [float(o) for o, _ in _polylines(svg)]
    assert len(ops) == 17
    assert ops[0] == pytest.approx(0.2) and ops[-1] == 1.0 and np.all(np.diff(ops) > 0)
    with pytest.raises(ValueError):
        io.export_svg([])


# -- CLI exit codes ---------------------------------------------------------------------------------


def test_cli_dist(files, capsys):
    out = files["dir"] / "res.json"
    assert run(["dist", "--metric", SAMPLE_METRIC, "--knots", "8", "--out", str(out), str(files["circle"]), str(files["ellipse"])]) == 0
    d = float(capsys.readouterr().out.strip())
    assert d > 0
    payload = json.loads(out.read_text())
    assert payload["distance"] == d and payload["result"]["converged"] is True
    assert run(["dist", str(files["circle"]), str(files["circle"])]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.0


def test_cli_dist_nonconvergence_exit_1(files):
    assert run(["dist", "--knots", "8", "--tol", "1e-300", str(files["circle"]), str(files["ellipse"])]) == 1


def test_cli_geodesic_formats(files):
    base = files["dir"]
    for fmt in ("json", "csv", "svg"):
        out = base / f"geo.{fmt}"
        assert run(["geodesic", "--knots", "4", "--format", fmt, "--out", str(out), str(files["circle"]), str(files["ellipse"])]) == 0
        assert out.stat().st_size > 0
    path = io.load_path_or_curve(base / "geo.json")
    assert isinstance(path, CurvePath) and path.N == 4
    assert len(_polylines((base / "geo.svg").read_text())) == 5


def test_cli_input_errors(files):
    c = str(files["circle"])
    assert run(["dist", c]) == 2
    assert run(["dist", c, str(files["dir"] / "missing.json")]) == 2
    assert run(["dist", "--metric", "n=1,a0=1,a1=1", c, c]) == 2
    assert run(["bogus"]) == 2
    assert run(["dist", "--knots", "0", c, c]) == 2
    assert run(["dist", "--resolution", "15", c, c]) == 2
    assert run(["dist", c, str(files["fig8"])]) == 2
    assert run(["shape-dist", c, str(files["fig8"])]) == 2
    assert run(["exp", c, str(files["dir"] / "missing.json")]) == 2
    assert run(["reparam"]) == 2
    assert run(["verify", c]) == 2
    assert run(["export-svg"]) == 2


def test_cli_threads_env(files, monkeypatch):
    monkeypatch.setenv("SOBOCURVE_THREADS", "zero")
    assert run(["reparam", str(files["ellipse"])]) == 2
    monkeypatch.setenv("SOBOCURVE_THREADS", "2")
    assert run(["reparam", str(files["ellipse"])]) == 0


def test_cli_shape_dist(files, capsys):
    out = files["dir"] / "shape.json"
    assert run(["shape-dist", "--knots", "8", "--dp-grid", "16", "--out", str(out), str(files["circle"]), str(files["ellipse"])]) == 0
    d = float(capsys.readouterr().out.strip())
    payload = json.loads(out.read_text())
    assert payload["distance"] == d and "optimal_diffeo" in payload


def test_cli_exp_and_log(files, capsys):
    out = files["dir"] / "exp.json"
    assert run(["exp", "--knots", "10", "--out", str(out), str(files["circle"]), str(files["field"])]) == 0
    assert io.load_path_or_curve(out).N == 10
    capsys.readouterr()
    logf = files["dir"] / "log.json"
    assert run(["log", "--knots", "8", "--out", str(logf), str(files["circle"]), str(files["ellipse"])]) == 0
    u = io.load_field(logf)
    assert u.shape == (32, 2)
    bad = files["dir"] / "short.json"
    io.write_json({"samples": np.zeros((16, 2))}, bad)
    assert run(["exp", str(files["circle"]), str(bad)]) == 2


def test_cli_reparam(files, capsys):
    out = files["dir"] / "cs.json"
    assert run(["reparam", "--out", str(out), str(files["ellipse"])]) == 0
    capsys.readouterr()
    d = json.loads(out.read_text())
    assert set(d) >= {"samples", "diffeo"}
    phi = files["dir"] / "phi.json"
    io.write_json(io.diffeo_to_dict(Diffeo.rotation(32, 2 * np.pi * 3 / 32)), phi)
    out2 = files["dir"] / "rot.json"
    assert run(["reparam", "--out", str(out2), str(files["ellipse"]), str(phi)]) == 0
    rot = io.load_curve(out2)
    assert np.array_equal(rot.samples, np.roll(ellipse(32).samples, -3, axis=0))
    assert float(capsys.readouterr().out.strip()) == pytest.approx(ellipse(32).length, rel=1e-13)


def test_cli_verify(files, capsys):
    assert run(["verify", "--suite", "gronwall", "--seed", "42"]) == 0
    lines = capsys.readouterr().out.splitlines()
    report = json.loads(lines[0])
    assert report["name"] == "gronwall" and report["pass"] is True and report["seed"] == 42
    assert any(line.endswith("PASS") for line in lines[1:])


def test_cli_export_svg(files, capsys):
    out = files["dir"] / "c.svg"
    assert run(["export-svg", "--out", str(out), str(files["circle"])]) == 0
    first = out.read_bytes()
    assert run(["export-svg", "--out", str(out), str(files["circle"])]) == 0
    assert out.read_bytes() == first
    assert run(["export-svg", str(files["dir"] / "none.json")]) == 2


def test_console_script(files):
    proc = subprocess.run(
        [sys.executable, "-m", "sobocurve.cli", "dist", str(files["circle"]), str(files["circle"])],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and float(proc.stdout) == 0.0
    proc = subprocess.run([sys.executable, "-m", "sobocurve.cli", "dist"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2
