"""Command-line front end: ``ppwave {inspect,killing,generate,normalize,verify-paper}``.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import checks
from . import geometry as geo
from .documents import DocumentError, load_document, spec_document
from .expr import ExprError
from .families import BUNDLED_SPECS, PlaneWaveSpec, S_dot_of
from .geometry import GridSpec, Point
from .killing import (
    KillingError,
    homogeneity_report,
    killing_algebra,
    require_normal_form,
    structure_constants,
    transversal_dimension,
)
from .normalize import NormalizationError, normalize_at


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# deterministic JSON


def _scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        s = format(x, ".17g")
        return s if ("." in s or "e" in s) else s + ".0"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with insertion-ordered keys and 17 significant digits for every float."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    return _scalar(obj)


# --------------------------------------------------------------------------
# commands


def _grid(args, doc) -> GridSpec:
    if args.grid:
        try:
            return GridSpec.from_json(json.loads(args.grid))
        except (json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
            raise UsageError(f"--grid: {exc}") from exc
    return doc.grid


def cmd_inspect(args) -> tuple[dict, int]:
    doc = load_document(args.document)
    pw = doc.pw()
    grid = _grid(args, doc)
    tol = args.tol
    pts = geo.as_points(grid, pw)
    ric = max(abs(geo.ricci(pw, p)) for p in pts)
    verdict = geo.is_plane_wave(pw, grid, tol)
    ranks = geo.rank_report(pw, grid, tol)
    cert = geo.decomposability_certificate(pw, grid, tol)
    report = {
        "name": doc.name,
        "n": pw.n,
        "ricci_flat": bool(ric < tol),
        "max_abs_ricci": ric,
        "plane_wave": bool(verdict),
        "plane_wave_method": verdict.method,
        "curvature_rank_histogram": {str(k): v for k, v in ranks.histogram.items()},
        "rank_le_1_points": len(ranks.exceptional),
        "decomposability_certificate": None if cert is None else cert.tolist(),
        "dim_bound": geo.dimension_bound(pw.n),
    }
    if doc.spec is not None:
        report["det_S_dot"] = [float(np.linalg.det(S_dot_of(doc.spec, u))) for u in grid.u_values()]
    return report, 0


def cmd_killing(args) -> tuple[dict, int]:
    doc = load_document(args.document)
    pw = doc.pw()
    base = doc.base()
    transform = None
    if args.auto_normalize:
        pw, T = normalize_at(pw, base)
        transform = T.to_json()
        grid = doc.normal_grid() if not args.grid else _grid(args, doc)
    else:
        grid = _grid(args, doc)
        try:
            normal = require_normal_form(pw, grid) and base == Point.origin(pw.n)
        except ArithmeticError:
            normal = False
        if not normal:
            raise UsageError("profile is not in normal form at the base point; rerun with --auto-normalize")
    alg = killing_algebra(pw, grid, args.tol)
    hom = homogeneity_report(pw, alg.basis)
    report = {
        "name": doc.name,
        "n": pw.n,
        "normalization": transform,
        "dimension": alg.dimension,
        "dim_bound": geo.dimension_bound(pw.n),
        "singular_values": alg.singular_values.tolist(),
        "singular_value_gap": alg.gap,
        "gap_trusted": alg.trusted,
        "basis": [K.to_json() for K in alg.basis],
        "transversal_dimension": transversal_dimension(alg.basis),
        "homogeneity": hom.to_json(),
        "brackets": _sparse_constants(structure_constants(alg.basis)),
    }
    return report, 0


def _sparse_constants(C: np.ndarray, tol: float = 1e-10) -> list:
    out = []
    d = C.shape[0]
    for i in range(d):
        for j in range(i + 1, d):
            coef = [float(v) if abs(v) > tol else 0.0 for v in C[i, j]]
            if any(coef):
                out.append({"i": i, "j": j, "coefficients": coef})
    return out


def cmd_generate(args) -> tuple[dict, int]:
    ref = args.spec
    if ref in BUNDLED_SPECS:
        spec = BUNDLED_SPECS[ref]()
        name = args.name or ref
    else:
        try:
            with open(ref) as fh:
                spec = PlaneWaveSpec.from_json(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot read spec {ref!r}: {exc}") from exc
        name = args.name or spec.name or spec.family
    grid = GridSpec.from_json(json.loads(args.grid)) if args.grid else GridSpec()
    return spec_document(spec, name, grid), 0


def cmd_normalize(args) -> tuple[dict, int]:
    doc = load_document(args.document)
    pw = doc.pw()
    base = doc.base()
    if args.base:
        vals = [float(v) for v in args.base.split(",")]
        if len(vals) != pw.n + 1:
            raise UsageError(f"--base needs u and {pw.n} x-coordinates")
        base = Point(x=vals[1:], u=vals[0])
    pn, T = normalize_at(pw, base)
    zero = np.zeros(pw.n)
    worst = max(max(abs(pn.H(u, zero)), float(np.max(np.abs(pn.H.gradient(u, zero)))))
                for u in np.linspace(pn.domain.u_min, pn.domain.u_max, doc.grid.u[2]))
    return {"name": doc.name, "base_point": base.to_json(), "transform": T.to_json(),
            "max_axis_residual": worst}, 0


def cmd_verify(args) -> tuple[object, int]:
    names = list(checks.CHECKS) if args.all or not args.names else args.names
    unknown = [n for n in names if n not in checks.CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(unknown)}; available: {', '.join(checks.CHECKS)}")
    results = [checks.run(n) for n in names]
    if args.emit_csv:
        checks.write_curves(args.emit_csv)
    code = 0 if all(r.passed for r in results) else 1
    if args.json:
        return [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results], code
    return "\n".join(r.line() for r in results), code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", help="grid JSON, e.g. '{\"u\": [-1, 1, 5], \"x_radius\": 1, \"x_count\": 5}'")
    common.add_argument("--tol", type=float, default=None, help="numerical tolerance")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    p = argparse.ArgumentParser(prog="ppwave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("inspect", parents=[common], help="curvature and classification report")
    s.add_argument("document")
    s.set_defaults(func=cmd_inspect, default_tol=geo.DEFAULT_TOL)
    s = sub.add_parser("killing", parents=[common], help="Killing algebra report")
    s.add_argument("document")
    s.add_argument("--auto-normalize", action="store_true", help="move to normal coordinates first")
    s.set_defaults(func=cmd_killing, default_tol=1e-7)
    s = sub.add_parser("generate", parents=[common], help="plane-wave spec to metric document")
    s.add_argument("spec", help="spec JSON file or bundled spec name")
    s.add_argument("--name")
    s.set_defaults(func=cmd_generate, default_tol=None)
    s = sub.add_parser("normalize", parents=[common], help="normal coordinates at a point")
    s.add_argument("document")
    s.add_argument("--base", help="base point as u,x1,...,xn")
    s.set_defaults(func=cmd_normalize, default_tol=None)
    s = sub.add_parser("verify-paper", parents=[common], help="run the bundled regression checks")
    s.add_argument("names", nargs="*")
    s.add_argument("--all", action="store_true")
    s.add_argument("--emit-csv", metavar="PATH")
    s.set_defaults(func=cmd_verify, default_tol=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.tol is None:
        args.tol = args.default_tol
    elif args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return 2
    try:
        out, code = args.func(args)
    except (UsageError, DocumentError, ExprError, NormalizationError, KillingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out if isinstance(out, str) else dumps(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
