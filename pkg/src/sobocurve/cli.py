"""Command-line front end.

Exit codes: 0 success, 1 computation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .curves import ImmersionError, act, constant_speed_reparam
from .geodesics import ComponentMismatchError, VelocityRecoveryError, exp_map, log_map, solve_bvp
from .metrics import MetricSpec, metric_inner
from .shape_space import shape_distance
from .verify import SUITES, run_suite

log = logging.getLogger("sobocurve")

COMMANDS = ("dist", "geodesic", "shape-dist", "exp", "log", "reparam", "verify", "export-svg")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad arguments or input files; maps to exit code 2."""


class ComputationError(Exception):
    """A solver did not deliver; maps to exit code 1."""


def threads() -> int:
    """Worker cap from ``SOBOCURVE_THREADS`` (default 1)."""
    raw = os.environ.get("SOBOCURVE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"SOBOCURVE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError("SOBOCURVE_THREADS must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sobocurve", description="Geodesics and shape distances under Sobolev metrics on closed curves.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="input files (curve, path or field JSON/CSV)")
    p.add_argument("--metric", default="n=2,a0=1,a2=1", help='e.g. "n=2,a0=1,a2=1" or "variant=length_weighted"')
    p.add_argument("--resolution", type=int, default=None, help="resample inputs to M points")
    p.add_argument("--knots", type=int, default=16, help="number N of path time intervals")
    p.add_argument("--tol", type=float, default=1e-6, help="gradient tolerance of the geodesic solver")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file")
    p.add_argument("--format", choices=("json", "csv", "svg"), default="json")
    p.add_argument("--dp-grid", type=int, default=64)
    p.add_argument("--orientation-reversal", action="store_true")
    p.add_argument("--suite", default="all", choices=sorted(SUITES) + ["all"])
    return p


# -- helpers --------------------------------------------------------------------


def _need(args, k: int):
    if len(args.inputs) != k:
        raise InputError(f"{args.command} expects {k} input file(s), got {len(args.inputs)}")


def _spec(args) -> MetricSpec:
    try:
        return MetricSpec.parse(args.metric)
    except ValueError as exc:
        raise InputError(f"bad --metric: {exc}") from exc


def _curve(args, path):
    if not Path(path).exists():
        raise InputError(f"no such file: {path}")
    try:
        c = io.load_curve(path)
        if args.resolution:
            c = c.resample(args.resolution)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return c


def _check_config(args):
    if args.knots < 1:
        raise InputError("--knots must be at least 1")
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    if args.dp_grid < 4:
        raise InputError("--dp-grid must be at least 4")
    if args.resolution is not None and (args.resolution < 16 or args.resolution % 2):
        raise InputError("--resolution must be even and at least 16")


def _emit(args, payload: dict, artifact=None):
    """Write the artifact (path/curve/field) in ``--format`` or the JSON payload to ``--out``."""
    if not args.out:
        return
    if args.format == "json" or artifact is None:
        io.write_json(payload, args.out)
    elif args.format == "csv":
        Path(args.out).write_text(io.to_csv(artifact))
    else:
        if isinstance(artifact, np.ndarray):
            raise InputError("SVG export is for curves and paths, not tangent fields")
        Path(args.out).write_text(io.export_svg(artifact))


def _header(args, spec) -> dict:
    return {"command": args.command, "metric": spec.to_dict(), "knots": args.knots}


# -- commands -----------------------------------------------------------------------


def cmd_dist(args):
    _need(args, 2)
    spec = _spec(args)
    a, b = (_curve(args, p) for p in args.inputs)
    res = solve_bvp(a, b, spec, N=args.knots, grad_tol=args.tol)
    print("%.17g" % res.distance_estimate)
    payload = _header(args, spec)
    payload.update(distance=res.distance_estimate, result=res.to_dict())
    if args.command == "geodesic":
        payload["path"] = io.path_to_dict(res.path)
    _emit(args, payload, res.path if args.command == "geodesic" else None)
    if not res.converged:
        raise ComputationError(f"geodesic solver did not converge (gradient norm {res.gradient_norm:.3g})")


def cmd_shape_dist(args):
    _need(args, 2)
    spec = _spec(args)
    a, b = (_curve(args, p) for p in args.inputs)
    res = shape_distance(a, b, spec, dp_grid=args.dp_grid, orientation_reversal=args.orientation_reversal, N=args.knots, grad_tol=args.tol)
    print("%.17g" % res.distance)
    payload = _header(args, spec)
    payload.update(res.to_dict())
    payload["path"] = io.path_to_dict(res.inner_result.path)
    _emit(args, payload, res.inner_result.path)


def cmd_exp(args):
    _need(args, 2)
    spec = _spec(args)
    c = _curve(args, args.inputs[0])
    try:
        u = io.load_field(args.inputs[1])
    except ValueError as exc:
        raise InputError(f"{args.inputs[1]}: {exc}") from exc
    if u.shape != c.samples.shape:
        if args.resolution:
            raise InputError("--resolution cannot be combined with a velocity field of another size")
        raise InputError("velocity field and curve sizes differ")
    steps = 1000 if 1000 % args.knots == 0 else args.knots * int(np.ceil(1000 / args.knots))
    path = exp_map(c, u, spec, T=1.0, steps=steps, knots=args.knots)
    print("%.17g" % np.sqrt(metric_inner(spec, c, u, u)))
    payload = _header(args, spec)
    payload["path"] = io.path_to_dict(path)
    _emit(args, payload, path)


def cmd_log(args):
    _need(args, 2)
    spec = _spec(args)
    a, b = (_curve(args, p) for p in args.inputs)
    u = log_map(a, b, spec, N=args.knots, grad_tol=args.tol)
    print("%.17g" % np.sqrt(metric_inner(spec, a, u, u)))
    payload = _header(args, spec)
    payload.update(scheme=a.scheme, samples=u)
    _emit(args, payload, u)


def cmd_reparam(args):
    if len(args.inputs) not in (1, 2):
        raise InputError("reparam expects a curve and optionally a diffeo file")
    c = _curve(args, args.inputs[0])
    if len(args.inputs) == 2:
        try:
            phi = io.diffeo_from_dict(io.read_json(args.inputs[1]))
        except ValueError as exc:
            raise InputError(f"{args.inputs[1]}: {exc}") from exc
        if phi.M != c.M:
            raise InputError("diffeo and curve resolutions differ")
        out = act(c, phi)
    else:
        out, phi = constant_speed_reparam(c)
    print("%.17g" % out.length)
    payload = io.curve_to_dict(out)
    payload["diffeo"] = io.diffeo_to_dict(phi)
    _emit(args, payload, out)


def cmd_verify(args):
    if args.inputs:
        raise InputError("verify takes no input files")
    names = list(SUITES) if args.suite == "all" else [args.suite]
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        groups = list(pool.map(lambda n: run_suite(n, args.seed), names))
    reports = [r for g in groups for r in g]
    for r in reports:
        sys.stdout.write(io.dumps(r.to_dict()))
    width = max(len(r.name) for r in reports)
    print(f"{'check':<{width}}  {'trials':>6}  {'worst margin':>14}  result")
    for r in reports:
        print(f"{r.name:<{width}}  {r.trials:>6}  {r.worst_margin:>14.6g}  {'PASS' if r.passed else 'FAIL'}")
    if args.out:
        io.write_json([r.to_dict() for r in reports], args.out)
    if not all(r.passed for r in reports):
        raise ComputationError("some checks failed")


def cmd_export_svg(args):
    _need(args, 1)
    src = args.inputs[0]
    if not Path(src).exists():
        raise InputError(f"no such file: {src}")
    try:
        obj = io.load_path_or_curve(src)
    except ValueError as exc:
        raise InputError(f"{src}: {exc}") from exc
    dim = obj.curves[0].dim if hasattr(obj, "curves") else obj.dim
    if dim < 2:
        raise InputError("SVG export needs at least two dimensions")
    svg = io.export_svg(obj)
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)


HANDLERS = {
    "dist": cmd_dist,
    "geodesic": cmd_dist,
    "shape-dist": cmd_shape_dist,
    "exp": cmd_exp,
    "log": cmd_log,
    "reparam": cmd_reparam,
    "verify": cmd_verify,
    "export-svg": cmd_export_svg,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_intermixed_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        _check_config(args)
        threads()
        HANDLERS[args.command](args)
    except (InputError, io.InputFormatError, ComponentMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ComputationError, ImmersionError, VelocityRecoveryError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
