"""Canonical JSON, CSV and SVG input/output for curves, paths and results."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .curves import Diffeo, DiscreteCurve
from .geodesics import CurvePath


class InputFormatError(ValueError):
    """Malformed or unsupported input file."""


# -- canonical JSON -------------------------------------------------------------


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null" if math.isnan(x) else ("1e999" if x > 0 else "-1e999")
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON: key order as given, 17 significant digits, one trailing newline.

    Non-finite floats become ``null`` (NaN) or ``+-1e999`` (which reads back as infinity).
    """
    return _encode(obj) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"cannot read JSON from {path}: {exc}") from exc


# -- curves, paths, diffeos -------------------------------------------------------


def curve_to_dict(c: DiscreteCurve) -> dict:
    return {"dim": c.dim, "samples": c.samples, "scheme": c.scheme}


def curve_from_dict(d) -> DiscreteCurve:
    if isinstance(d, list):
        d = {"samples": d}
    if not isinstance(d, dict) or "samples" not in d:
        raise InputFormatError("curve JSON needs a 'samples' array")
    samples = np.asarray(d["samples"], dtype=float)
    if samples.ndim != 2:
        raise InputFormatError("curve samples must be an M x d array")
    if "dim" in d and int(d["dim"]) != samples.shape[1]:
        raise InputFormatError(f"declared dim {d['dim']} does not match samples of width {samples.shape[1]}")
    return DiscreteCurve(samples, d.get("scheme", "spectral"))


def path_to_dict(p: CurvePath) -> dict:
    return {"times": p.times, "curves": [curve_to_dict(c) for c in p.curves]}


def path_from_dict(d) -> CurvePath:
    try:
        curves = [curve_from_dict(c) for c in d["curves"]]
        return CurvePath(np.asarray(d["times"], dtype=float), tuple(curves))
    except (KeyError, TypeError) as exc:
        raise InputFormatError("path JSON needs 'times' and 'curves'") from exc


def diffeo_to_dict(phi: Diffeo) -> dict:
    return {"knots": phi.knots, "shift": phi.shift}


def diffeo_from_dict(d) -> Diffeo:
    try:
        return Diffeo(np.asarray(d["knots"], dtype=float), float(d["shift"]))
    except (KeyError, TypeError) as exc:
        raise InputFormatError("diffeo JSON needs 'knots' and 'shift'") from exc


def _read_csv(path) -> np.ndarray:
    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    if rows:
                        raise
    except (OSError, ValueError) as exc:
        raise InputFormatError(f"cannot read CSV from {path}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputFormatError(f"{path}: expected a rectangular table of numbers")
    return np.array(rows)


def load_curve(path, scheme: str | None = None) -> DiscreteCurve:
    """Curve from JSON (``{"samples": ...}`` or a bare array) or CSV (one point per row)."""
    if str(path).lower().endswith(".csv"):
        c = DiscreteCurve(_read_csv(path), scheme or "spectral")
    else:
        d = read_json(path)
        if isinstance(d, dict) and scheme:
            d = dict(d, scheme=scheme)
        c = curve_from_dict(d)
    return c


def load_field(path) -> np.ndarray:
    """Tangent field stored like a curve (``samples`` array or CSV)."""
    if str(path).lower().endswith(".csv"):
        return _read_csv(path)
    d = read_json(path)
    arr = np.asarray(d["samples"] if isinstance(d, dict) and "samples" in d else d, dtype=float)
    if arr.ndim != 2:
        raise InputFormatError("field must be an M x d array")
    return arr


def load_path_or_curve(path):
    if str(path).lower().endswith(".csv"):
        return load_curve(path)
    d = read_json(path)
    if isinstance(d, dict) and "curves" in d:
        return path_from_dict(d)
    if isinstance(d, dict) and "path" in d:
        return path_from_dict(d["path"])
    return curve_from_dict(d)


def to_csv(obj) -> str:
    """One row per sample; paths carry ``knot, time`` columns in front."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fmt = lambda a: ["%.17g" % x for x in a]  # noqa: E731
    if isinstance(obj, CurvePath):
        d = obj.curves[0].dim
        w.writerow(["knot", "time"] + [f"x{j}" for j in range(d)])
        for k, (t, c) in enumerate(zip(obj.times, obj.curves)):
            for row in c.samples:
                w.writerow([k] + fmt([t]) + fmt(row))
    else:
        samples = obj.samples if isinstance(obj, DiscreteCurve) else np.asarray(obj)
        w.writerow([f"x{j}" for j in range(samples.shape[1])])
        for row in samples:
            w.writerow(fmt(row))
    return buf.getvalue()


# -- SVG ------------------------------------------------------------------------------


def export_svg(obj, dims=(0, 1), width: int = 512, stroke: str = "#1f4e79") -> str:
    """Deterministic SVG with one closed polyline per curve.

    Paths get a time-graded opacity from 0.2 (first knot) to 1 (last). The
    view box is the data bounding box with a 5% margin; ``y`` points up.
    """
    if isinstance(obj, CurvePath):
        curves = [c.samples for c in obj.curves]
        graded = True
    elif isinstance(obj, DiscreteCurve):
        curves, graded = [obj.samples], False
    else:
        curves, graded = [np.asarray(c.samples if isinstance(c, DiscreteCurve) else c) for c in obj], True
    if not curves:
        raise ValueError("nothing to draw")
    i, j = dims
    pts = [np.stack([c[:, i], -c[:, j]], axis=1) for c in curves]
    allp = np.concatenate(pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    margin = 0.05 * span
    lo, span = lo - margin, span + 2 * margin
    height = int(round(width * span[1] / span[0])) or 1
    sw = 0.004 * max(span)
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="{lo[0]:.6f} {lo[1]:.6f} {span[0]:.6f} {span[1]:.6f}">'
    ]
    n = len(pts)
    for k, p in enumerate(pts):
        closed = np.vstack([p, p[:1]])
        coords = " ".join(f"{x:.6f},{y:.6f}" for x, y in closed)
        op = 0.2 + 0.8 * k / (n - 1) if graded and n > 1 else 1.0
        lines.append(f'<polyline fill="none" stroke="{stroke}" stroke-width="{sw:.6f}" stroke-opacity="{op:.4f}" points="{coords}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
