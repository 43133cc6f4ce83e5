"""Command-line front end: ``bellforge <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 infeasible or no violation,
3 usage error.  Results go to stdout (JSON or CSV), progress to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import catalog, optimize, synthesis
from .inequality import NoViolation
from .quantum import W_STATE, SmallAngleSpec, SymmetricState

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_NO_VIOLATION = 2
EXIT_USAGE = 3
DIGITS = 9


class UsageError(Exception):
    pass


def _round(obj, digits: int = DIGITS):
    """Round floats to ``digits`` significant digits, recursively."""
    if isinstance(obj, float):
        if not math.isfinite(obj) or obj == 0.0:
            return obj + 0.0
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    return obj


def _emit(obj, out) -> None:
    out.write(json.dumps(_round(obj), indent=1, sort_keys=True) + "\n")


def _progress(label: str):
    def report(done: int, total: int) -> None:
        print(f"{label}: {done}/{total}", file=sys.stderr)

    return report


def _number(text: str):
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def _number_list(text: str) -> tuple:
    if not text.strip():
        raise UsageError("empty list")
    return tuple(_number(t) for t in text.split(","))


def _grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("grid must be start:stop:step")
    a, b, step = (float(p) for p in parts)
    if step <= 0 or b < a:
        raise UsageError("grid needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / step + 1e-9))
    # exact decimal arithmetic keeps grid values such as 0.61 free of drift
    fa, fs = Fraction(parts[0]), Fraction(parts[2])
    return [float(fa + k * fs) for k in range(n + 1)]


# --- commands ---------------------------------------------------------------------


def cmd_verify(args, out) -> int:
    try:
        pool = catalog.load_file(args.catalog) if args.catalog else catalog.entries()
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read catalog: {exc}") from exc
    if args.only:
        wanted = set(args.only)
        unknown = wanted - {e.id for e in pool}
        if unknown:
            raise UsageError(f"unknown catalog ids: {', '.join(sorted(unknown))}")
        pool = [e for e in pool if e.id in wanted]
    reports = catalog.verify_all(pool)
    ok = all(r.ok for r in reports)
    _emit({"ok": ok, "count": len(reports), "entries": [r.to_dict() for r in reports]}, out)
    for r in reports:
        if not r.ok:
            print(f"FAILED {r.id}: {'; '.join(r.errors) or 'check failed'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def _state(name: str) -> SymmetricState:
    if name.upper() == "W":
        return W_STATE
    try:
        amps = [float(t) for t in name.split(",")]
    except ValueError:
        raise UsageError(f"state must be W or comma-separated amplitudes w,c111[,c000]: {name!r}") from None
    if not 1 <= len(amps) <= 3:
        raise UsageError("state needs one to three amplitudes")
    return SymmetricState.from_amplitudes(*amps)


def cmd_synthesize(args, out) -> int:
    m = args.m
    if args.slopes is None and args.angles is None:
        if m == 1:
            # a single setting cannot yield a violation
            args.slopes = "1"
        else:
            raise UsageError("give --slopes or --angles")
    if args.slopes is not None and args.angles is not None:
        raise UsageError("--slopes and --angles are exclusive")
    values = _number_list(args.slopes if args.slopes is not None else args.angles)
    if m is not None and len(values) != m:
        raise UsageError(f"--m {m} but {len(values)} values given")
    m = len(values)
    extra = {}
    if args.slopes is not None:
        if args.state.upper() != "W":
            raise UsageError("small-angle synthesis uses --state W (add --mixing for the |111> admixture)")
        if args.mixing is None:
            res = synthesis.synthesize(SmallAngleSpec(values))
        elif args.mixing == "auto":
            fp = optimize.mixing_multistart(m, values)
            res = fp.result
            extra = {"mixing_iterations": fp.iterations, "mixing_eta_crit": fp.eta_crit, "mixing_slope": fp.a}
        else:
            res = synthesis.synthesize(SmallAngleSpec(values, mixing_slope=float(_number(args.mixing))))
    else:
        if args.mixing is not None:
            raise UsageError("--mixing applies to --slopes only")
        res = synthesis.synthesize(_state(args.state), [float(v) for v in values])
    data = res.to_dict()
    data["id"] = synthesis.identify(res.inequality)
    data.update(extra)
    _emit(data, out)
    return EXIT_OK


def cmd_scan(args, out) -> int:
    step = args.step if args.step is not None else math.pi / 20

    def stream(rec):
        out.write(json.dumps(_round(rec), sort_keys=True) + "\n")

    res = synthesis.grid_scan(
        args.m, step, args.family, mode=args.mode, refine=not args.no_refine, jobs=args.jobs,
        sink=stream if args.stream else None, progress=_progress("scan"),
    )
    if res.best is None:
        _emit({"best": None, "distinct": 0}, out)
        return EXIT_NO_VIOLATION
    best = res.best.to_dict()
    best["id"] = synthesis.identify(res.best.inequality)
    _emit({"best": best, "distinct": len(res.inequalities), "points": len(res.records),
           "inequalities": sorted(res.inequalities)}, out)
    return EXIT_OK


def cmd_optimize(args, out) -> int:
    params, eta = optimize.minimize_eta_crit(args.family, seed=args.seed)
    if args.format == "json":
        _emit({"id": args.family, "params": {k: float(v) for k, v in params.items()}, "eta_crit": float(eta)}, out)
    else:
        for k, v in params.items():
            out.write(f"{k} {float(v):.6f}\n")
        out.write(f"eta_crit {float(eta):.6f}\n")
    return EXIT_OK


def cmd_curve(args, out) -> int:
    try:
        entry = catalog.load(args.ineq)
    except catalog.CatalogError as exc:
        raise UsageError(str(exc)) from exc
    if not entry.symmetric:
        raise UsageError("curves need a symmetric inequality")
    etas = _grid(args.grid)
    pts = optimize.max_violation_curve(
        entry.inequality, etas, args.mode, starts=args.starts, seed=args.seed, progress=_progress("curve"),
    )
    out.write(optimize.curve_csv(pts))
    return EXIT_OK


def cmd_catalog(args, out) -> int:
    if args.id:
        try:
            entry = catalog.load(args.id)
        except catalog.CatalogError as exc:
            raise UsageError(str(exc)) from exc
        _emit(entry.to_dict(), out)
    elif args.dump:
        out.write(catalog.to_json() + "\n")
    else:
        for e in catalog.entries():
            out.write(f"{e.id}\t{e.family}\t{e.reference_eta}\t{e.label}\n")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    seed = optimize.default_seed()
    p = argparse.ArgumentParser(prog="bellforge", description="Detection-efficiency thresholds of tripartite Bell inequalities.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check every catalogued inequality")
    v.add_argument("--only", nargs="+", metavar="ID")
    v.add_argument("--catalog", metavar="FILE", help="JSON catalog to verify instead of the built-in one")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("synthesize", help="solve the synthesis LP for one angle configuration")
    s.add_argument("--m", type=int)
    s.add_argument("--slopes", help="comma-separated small-angle slopes")
    s.add_argument("--angles", help="comma-separated explicit angles (radians)")
    s.add_argument("--state", default="W", help="W or amplitudes w,c111[,c000] (explicit angles only)")
    s.add_argument("--mixing", help="mixing slope a, or 'auto' to iterate to a fixed point")
    s.set_defaults(func=cmd_synthesize)

    g = sub.add_parser("scan", help="grid scan over angles or slopes")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--step", type=float, help="grid step (default pi/20)")
    g.add_argument("--mode", choices=("angles", "slopes"), default="angles")
    g.add_argument("--family", choices=("W", "W+111"), default="W")
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--no-refine", action="store_true")
    g.add_argument("--stream", action="store_true", help="print one JSON line per grid point")
    g.set_defaults(func=cmd_scan)

    o = sub.add_parser("optimize", help="optimal free parameters of a closed-form threshold")
    o.add_argument("--family", required=True, choices=sorted(optimize.conditions()))
    o.add_argument("--format", choices=("table", "json"), default="table")
    o.add_argument("--seed", type=int, default=seed)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("curve", help="maximum violation versus efficiency (CSV)")
    c.add_argument("--ineq", required=True, help="catalog id")
    c.add_argument("--grid", required=True, help="start:stop:step")
    c.add_argument("--mode", choices=optimize.CURVE_MODES, default="full")
    c.add_argument("--starts", type=int, default=optimize.CURVE_STARTS)
    c.add_argument("--seed", type=int, default=seed)
    c.set_defaults(func=cmd_curve)

    k = sub.add_parser("catalog", help="list or print catalog entries")
    k.add_argument("--id")
    k.add_argument("--dump", action="store_true", help="print the whole catalog as JSON")
    k.set_defaults(func=cmd_catalog)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoViolation, synthesis.SynthesisError) as exc:
        print(f"no violation: {exc}", file=sys.stderr)
        return EXIT_NO_VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
