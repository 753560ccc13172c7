"""Command-line interface: ``tetradfield {verify,report,spherical} ...``.

Exit codes: 0 pass, 1 quantitative failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics
from .chart import DiffConfig, load_probes, random_probes
from .concomitants import invariant_arrays, killing_array, lorentz_metric_from_coframe
from .errors import ConfigError, FitFailure, ProjectionFailure, TetradError
from .frame import torsion_array
from .kernels import torsion_from_jet
from .liealg import BreathingFunction, BreathingSpec, breathing_closed_frame, closed_frame, get_algebra
from .radial import parse_radial
from .specs import build_frame, build_lagrangian, holonomic_frame, read_document, validate
from . import spherical as sph

STANDARD_FAMILIES = ('{"family":"affine_f","f_terms":{"const":1}}',
                     '{"family":"affine_f","f_terms":{"const":1,"I1":0.1}}',
                     "born_infeld:1,0.3,0.2",
                     "split_sqrt:1,1,0.3,0.5")
NEGATIVE_VALUED = ("--scan", "--at", "--t-range", "--window", "--radii")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str, sep=",") -> list:
    try:
        return [float(v) for v in str(text).split(sep) if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _cfg(args) -> DiffConfig:
    return DiffConfig(step=args.step, stencil_order=args.stencil_order)


def _clean(obj):
    """Plain-Python copy with numpy scalars and arrays converted."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _probe_points(args, dim: int, chart: str, box=None, annulus=None):
    if getattr(args, "probe_file", None):
        return load_probes(args.probe_file).points
    if getattr(args, "at", None):
        pts = np.array([_floats(a) for a in args.at])
        if pts.shape[1] != dim:
            raise ConfigError(f"--at points need {dim} coordinates")
        return pts
    return random_probes(args.probes, dim, args.seed, box=box, annulus=annulus, chart_id=chart).points


def _frame_box(f):
    if f.chart_id == "spherical_txyz":
        return None, (0.2, 1.2)
    if f.chart_id == "adapted_breathing":
        return [(-1.0, 1.0)] + [(-0.5, 0.5)] * (f.dim - 1), None
    return None, None


def _per_probe_rows(points, values: dict) -> list:
    rows = []
    for k, x in enumerate(points):
        row = {"probe": k}
        row.update({f"x{i}": float(v) for i, v in enumerate(x)})
        for name, arr in values.items():
            row[name] = float(arr[k])
        rows.append(row)
    return rows


def _emit(report: dict, rows, args):
    report = _clean({"version": 1, **report})
    validate(report, "report")
    if args.format == "csv":
        buf = io.StringIO()
        rows = _clean(rows) or [{}]
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2) + "\n"
    if args.out and args.out != "-":
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------------------
# verify


def _verify_report(f, points, lagrangians, args, cfg, extra):
    results, sup = [], 0.0
    for text in lagrangians:
        spec = build_lagrangian(text)
        if spec.gl_invariant and args.route == "closed":
            K = dynamics.residual_closed_form(f, points, spec, cfg).k
        else:
            K = dynamics.residual_generic(f, points, spec, cfg)
        norms = np.max(np.abs(K), axis=(1, 2))
        s = float(np.max(norms))
        sup = max(sup, s)
        results.append({"lagrangian": spec.to_dict(), "sup_norm": s, "mean_norm": float(np.mean(norms)),
                        "pass": s < args.tol})
    report = {"kind": "verify", "pass": all(r["pass"] for r in results), "tol": args.tol,
              "seed": args.seed, "frame": f.spec, "probes": len(points), "sup_norm": sup,
              "results": results, "diff_config": cfg.to_dict(), **extra}
    rows = [{"lagrangian": json.dumps(r["lagrangian"], sort_keys=True), "sup_norm": r["sup_norm"],
             "pass": r["pass"]} for r in results]
    return report, rows


def cmd_verify(args) -> int:
    cfg = _cfg(args)
    if args.tol is None:
        args.tol = 1e-6
    if args.target == "closed":
        C = get_algebra(args.algebra)
        f = closed_frame(C, args.chart)
        points = _probe_points(args, f.dim, f.chart_id)
        lags = args.lagrangian or list(STANDARD_FAMILIES)
        extra = {"algebra": C.name, "route": args.route}
    elif args.target == "breathing":
        C = get_algebra(args.algebra)
        lam = BreathingFunction.parse(args.lambda_)
        f = breathing_closed_frame(BreathingSpec(C, lam, args.chart))
        box = [tuple(_floats(args.t_range))] + [(-0.5, 0.5)] * C.dim
        points = _probe_points(args, f.dim, f.chart_id, box=box)
        lags = args.lagrangian or list(STANDARD_FAMILIES)
        extra = {"algebra": C.name, "route": args.route, "lambda": lam.text}
    else:
        f = holonomic_frame(args.dim)
        points = _probe_points(args, f.dim, f.chart_id)
        lags = args.lagrangian or ['{"family":"weitzenbock","c1":1,"c2":2,"c3":-4}']
        extra = {"route": "generic"}
        args.route = "generic"
    report, rows = _verify_report(f, points, lags, args, cfg, extra)
    return _emit(report, rows, args)


# ---------------------------------------------------------------------------
# report


def _report_frame(args):
    doc = read_document(args.frame)
    if args.alpha is not None:
        doc.setdefault("params", {})["alpha"] = args.alpha
    return build_frame(doc)


def cmd_report(args) -> int:
    cfg = _cfg(args)
    f = _report_frame(args)
    box, annulus = _frame_box(f)
    points = _probe_points(args, f.dim, f.chart_id, box=box, annulus=annulus)
    what = args.what
    base = {"seed": args.seed, "frame": f.spec, "probes": len(points), "diff_config": cfg.to_dict(),
            "tol": args.tol}
    if what == "invariants":
        E, e, de = f.jet(points, cfg)
        d = invariant_arrays(E, torsion_from_jet(E, de))
        cols = {k: d[k] for k in ("I1", "I3", "J1", "J2", "J3", "J2_affine", "delta")}
        for p in range(3):
            cols[f"tr_gamma_p{p + 2}"] = d["trace_powers"][:, p]
        rows = _per_probe_rows(points, cols)
        ok = True
        if args.tol is not None:
            ok = bool(np.all(np.abs(d["J2_affine"] - f.dim / 4) < args.tol))
        report = {"kind": "invariants", "pass": ok, **base, "per_probe": rows}
        return _emit(report, rows, args)
    if what == "metric":
        S = torsion_array(f, points, cfg)
        gam = killing_array(S)
        h = lorentz_metric_from_coframe(np.linalg.inv(f.eval(points)))
        n = f.dim
        iu = np.triu_indices(n)
        cols = {f"gamma_{i}{j}": gam[:, i, j] for i, j in zip(*iu)}
        cols.update({f"h_{i}{j}": h[:, i, j] for i, j in zip(*iu)})
        rows = _per_probe_rows(points, cols)
        report = {"kind": "metric", "pass": True, **base, "per_probe": rows,
                  "gamma": gam, "lorentz": h}
        return _emit(report, rows, args)
    spec = build_lagrangian(args.lagrangian)
    base["lagrangian"] = spec.to_dict()
    if what == "residual":
        if spec.gl_invariant and args.route == "closed":
            K = dynamics.residual_closed_form(f, points, spec, cfg).k
        else:
            K = dynamics.residual_generic(f, points, spec, cfg)
        norms = np.max(np.abs(K), axis=(1, 2))
        tol = 1e-6 if args.tol is None else args.tol
        rows = _per_probe_rows(points, {"norm": norms})
        report = {"kind": "residual", "pass": bool(np.max(norms) < tol), **base, "tol": tol,
                  "sup_norm": float(np.max(norms)), "mean_norm": float(np.mean(norms)),
                  "per_probe": rows}
        return _emit(report, rows, args)
    if what == "currents":
        c = dynamics.currents(f, points, spec, cfg)
        div = dynamics.hyperspin_divergence(f, points, spec, cfg)
        dn = np.max(np.abs(div), axis=(1, 2))
        tol = 1e-6 if args.tol is None else args.tol
        rows = _per_probe_rows(points, {"j_mixed_sup": np.max(np.abs(c.j_mixed), axis=(1, 2)),
                                        "hyperspin_div_sup": dn})
        report = {"kind": "currents", "pass": bool(np.max(dn) < tol), **base, "tol": tol,
                  "sup_norm": float(np.max(dn)), "per_probe": rows}
        return _emit(report, rows, args)
    raise ConfigError(f"unknown report {what!r}")


def cmd_curvature(args) -> int:
    cfg = _cfg(args)
    f = _report_frame(args)
    box, annulus = _frame_box(f)
    points = _probe_points(args, f.dim, f.chart_id, box=box, annulus=annulus)
    lhs, rhs, diff = dynamics.curvature_identity_check(f, points, cfg)
    tol = 1e-5 if args.tol is None else args.tol
    rel = np.abs(diff) / (1 + np.abs(lhs))
    rows = _per_probe_rows(points, {"R": lhs, "rhs": rhs, "defect": np.abs(diff)})
    report = {"kind": "curvature-identity", "pass": bool(np.max(rel) < tol), "tol": tol, "seed": args.seed,
              "frame": f.spec, "lagrangian": None, "probes": len(points), "sup_norm": float(np.max(rel)),
              "diff_config": cfg.to_dict(), "per_probe": rows}
    return _emit(report, rows, args)


# ---------------------------------------------------------------------------
# spherical


def _shapes(args):
    doc = read_document(args.shapes) if not args.shapes.startswith("su2") else {"builtin": "su2_background"}
    if args.alpha is not None:
        doc["alpha"] = args.alpha
    return sph.radial_shapes_from_dict(doc)


def _radii(args, default):
    return _floats(args.radii) if args.radii else list(default)


def _gauge(args):
    if getattr(args, "radial", None):
        return {"radial": args.radial}
    if getattr(args, "time", None):
        return {"time": args.time}
    return None


def parse_pert(text: str) -> sph.PerturbationShapes:
    """``p0:c=1,d=0.5``, ``eps:<expr>`` / ``eta:<expr>`` (linear gauge directions) or JSON components."""
    text = text.strip()
    if text.startswith("{"):
        return sph.PerturbationShapes.from_dict(json.loads(text))
    head, _, body = text.partition(":")
    if head == "p0":
        kw = {}
        for item in filter(None, body.split(",")):
            k, _, v = item.partition("=")
            if k not in ("c", "d"):
                raise ConfigError(f"p0 accepts c and d, got {k!r}")
            kw[k] = float(v)
        return sph.p0_family(**kw)
    if head in ("eps", "eta"):
        return sph.linear_gauge(sph.PerturbationShapes(), {head: parse_radial(body)}, 0.5)
    raise ConfigError(f"cannot parse perturbation {text!r}")


def cmd_spherical(args) -> int:
    cfg = _cfg(args)
    what = args.what
    if what == "indicial":
        return _cmd_indicial(args, cfg)
    shapes = _shapes(args)
    if what == "gauge":
        g = _gauge(args)
        if g is None:
            raise ConfigError("gauge needs --radial or --time")
        out = sph.apply_gauge(shapes, g)
        radii = _radii(args, [0.25, 0.5, 1.0, 2.0])
        table = out.table(radii)
        rows = [{"r": r, **{n: table[n][k] for n in sph.RADIAL_NAMES}} for k, r in enumerate(radii)]
        report = {"kind": "spherical-gauge", "pass": True, "gauge": g, "alpha": shapes.alpha,
                  "shapes": table, "seed": args.seed, "tol": args.tol}
        return _emit(report, rows, args)
    spec = build_lagrangian(args.lagrangian)
    if what == "residual":
        g = _gauge(args)
        f = sph.isotropic_frame(sph.apply_gauge(shapes, g) if g else shapes)
        tol = 1e-6 if args.tol is None else args.tol
        rows = []
        for r in _radii(args, [0.1, 0.3, 0.6, 1.0, 1.5]):
            res = sph.extract_isotropic_residual(f, spec, args.t, r, cfg)
            rows.append(res.to_dict())
        sup = max(max(abs(row[n]) for n in sph.RESIDUAL_NAMES) for row in rows)
        report = {"kind": "spherical-residual", "pass": sup < tol, "tol": tol, "lagrangian": spec.to_dict(),
                  "sup_norm": sup, "per_probe": rows, "seed": args.seed, "gauge": g}
        return _emit(report, rows, args)
    if what == "linearize":
        pert = parse_pert(args.pert)
        tol = 1e-5 if args.tol is None else args.tol
        lcfg = sph.LINEAR_CFG if args.step == DiffConfig().step else cfg
        rows = []
        for r in _radii(args, [0.1, 0.3, 0.7, 1.5]):
            v = sph.linear_residual(shapes, spec, pert, r, lcfg)
            rows.append({"r": r, **dict(zip(sph.RESIDUAL_NAMES, v))})
        sup = max(max(abs(row[n]) for n in sph.RESIDUAL_NAMES) for row in rows)
        report = {"kind": "spherical-linearize", "pass": sup < tol, "tol": tol, "lagrangian": spec.to_dict(),
                  "perturbation": args.pert, "sup_norm": sup, "per_probe": rows, "seed": args.seed}
        return _emit(report, rows, args)
    raise ConfigError(f"unknown spherical command {what!r}")


def _cmd_indicial(args, cfg):
    lo, hi, st = _floats(args.scan, ":")
    grid = lo + st * np.arange(int(round((hi - lo) / st)) + 1)
    if args.synthetic:
        res = sph.indicial_scan(sph.synthetic_operator(tuple(_floats(args.synthetic))), grid)
        spec_doc = None
    else:
        spec = build_lagrangian(args.lagrangian)
        spec_doc = spec.to_dict()
        lcfg = sph.LINEAR_CFG if args.step == DiffConfig().step else cfg
        res = sph.indicial_exponents(spec, {"p_min": lo, "p_max": hi, "step": st}, cfg=lcfg)
    tol = 0.05 if args.tol is None else args.tol
    ok = True
    if args.expect:
        ok = all(any(abs(p - q) <= tol for p in res.roots) for q in _floats(args.expect))
    rows = [{"root": p} for p in res.roots]
    report = {"kind": "spherical-indicial", "pass": ok, "tol": tol, "lagrangian": spec_doc,
              "seed": args.seed, **res.to_dict()}
    return _emit(report, rows, args)


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="probe RNG seed")
    g.add_argument("--step", type=float, default=DiffConfig().step, help="divergence step")
    g.add_argument("--stencil-order", type=int, default=4, choices=(2, 4, 6))
    g.add_argument("--tol", type=float, default=None, help="pass/fail tolerance (command default)")
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="tetradfield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    verify = sub.add_parser("verify", help="exact-solution suites")
    vsub = verify.add_subparsers(dest="target", required=True, parser_class=_Parser)
    for name in ("closed", "breathing", "holonomic"):
        v = vsub.add_parser(name, parents=[common])
        v.add_argument("--lagrangian", action="append", help="repeatable; default: the standard families")
        v.add_argument("--probes", type=int, default=50)
        v.add_argument("--probe-file")
        v.add_argument("--at", action="append")
        v.add_argument("--route", choices=("closed", "generic"), default="closed")
        if name != "holonomic":
            v.add_argument("--algebra", default="so3" if name == "closed" else "su2")
            v.add_argument("--chart", default="group_rotation_vector")
        else:
            v.add_argument("--dim", type=int, default=4)
        if name == "breathing":
            v.add_argument("--lambda", dest="lambda_", default="exp:0.5")
            v.add_argument("--t-range", default="-1,1")
        v.set_defaults(func=cmd_verify)

    report = sub.add_parser("report", help="invariants, metrics, residuals, currents")
    rsub = report.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("invariants", "metric", "residual", "currents", "curvature-identity"):
        r = rsub.add_parser(name, parents=[common])
        r.add_argument("--frame", required=True, help="builtin:<name>, JSON or a JSON file")
        r.add_argument("--alpha", type=float, default=None)
        r.add_argument("--probes", type=int, default=20)
        r.add_argument("--probe-file")
        r.add_argument("--at", action="append", help="comma-separated point, repeatable")
        if name in ("residual", "currents"):
            r.add_argument("--lagrangian", default="born_infeld:1,0.3,0.2")
            r.add_argument("--route", choices=("closed", "generic"), default="closed")
        r.set_defaults(func=cmd_curvature if name == "curvature-identity" else cmd_report)

    sph_p = sub.add_parser("spherical", help="isotropic reduction and indicial analysis")
    ssub = sph_p.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("residual", "gauge", "linearize", "indicial"):
        s = ssub.add_parser(name, parents=[common])
        s.add_argument("--lagrangian", default="born_infeld:1,0.3,0.2")
        s.add_argument("--shapes", default="su2_background")
        s.add_argument("--alpha", type=float, default=None)
        s.add_argument("--radii", default=None, help="comma-separated radii")
        if name in ("residual", "gauge"):
            s.add_argument("--radial", help="radial gauge, e.g. 'omega:2r'")
            s.add_argument("--time", help="time gauge, e.g. 'eps:0.2r^2'")
        if name == "residual":
            s.add_argument("--t", type=float, default=0.0)
        if name == "linearize":
            s.add_argument("--pert", default="p0:c=1,d=0.5")
        if name == "indicial":
            s.add_argument("--scan", default="-5:1:0.05", help="p_min:p_max:step")
            s.add_argument("--expect", default=None, help="comma-separated expected roots")
            s.add_argument("--synthetic", default=None,
                           help="scan the manufactured system with these roots instead")
        s.set_defaults(func=cmd_spherical)
    return parser


def _join_negative(argv):
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in NEGATIVE_VALUED and k + 1 < len(argv):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
        else:
            out.append(a)
            k += 1
    return out


def main(argv=None) -> int:
    argv = _join_negative(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tetradfield: error: {exc}", file=sys.stderr)
        return 2
    except (FitFailure, ProjectionFailure) as exc:
        print(f"tetradfield: verification failed: {exc}", file=sys.stderr)
        return 1
    except (TetradError, OSError, ValueError) as exc:
        print(f"tetradfield: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
