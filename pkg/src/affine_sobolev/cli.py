"""Command-line front end: ``affine-sobolev <command> ...``.

Every command prints one JSON document (``--csv`` gives flat rows instead)
holding the schema version, the library version, the full configuration and
the report. Exit status is 0 when every verdict passes (degenerate counts as
passing), 1 when some check fails and 2 for malformed input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import __version__

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Malformed or unresolvable input; maps to exit status 2."""


# ---------------------------------------------------------------------------
# serialization


def _num(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 2**53:
        return repr(float(x))
    return format(x, ".17g")


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    import numpy as np

    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return json.dumps(str(obj))


def _csv_rows(report: dict) -> list[dict]:
    if "links" in report:
        return [
            {k: l[k] for k in ("larger", "smaller", "margin", "relative_margin", "tolerance", "verdict")}
            for l in report["links"]
        ]
    if report.get("kind") == "sweep":
        return [{"step": i + 1, **prm, "ratio": r} for i, (prm, r) in enumerate(zip(report["params"], report["ratios"]))]
    if "history" in report:
        return [{"evaluation": i + 1, "ratio": r} for i, r in enumerate(report["history"])]
    return [{k: v for k, v in report.items() if not isinstance(v, (dict, list))}]


def _to_csv(report: dict) -> str:
    rows = _csv_rows(report)
    buf = io.StringIO()
    fields: list[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# input resolution


def resolve_field(spec: str, n: int | None = None, cells: int | None = None):
    """Built-in name (optionally ``name:theta`` or ``builtin:name``) or a binary field path."""
    from . import fields as F

    name = spec[len("builtin:") :] if spec.startswith("builtin:") else spec
    base, _, arg = name.partition(":")
    params = {"theta": float(arg)} if arg else {}
    try:
        return F.named_field(base, n or 2, cells, **params)
    except KeyError:
        if spec.startswith("builtin:"):
            raise InputError(f"unknown built-in field {name!r}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    path = Path(spec)
    if not path.exists():
        raise InputError(f"{spec!r} is neither a built-in field nor an existing file")
    try:
        return F.load_field(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read field {spec!r}: {exc}") from None


def resolve_profile(spec: str):
    """Family name (``cone``, ``step``, ...), inline JSON, or a JSON file."""
    from . import profiles as P

    name = spec[len("builtin:") :] if spec.startswith("builtin:") else spec
    try:
        if not name.lstrip().startswith("{"):
            if Path(name).exists() and not spec.startswith("builtin:"):
                return P.profile_from_json(json.loads(Path(name).read_text()))
            return P.profile_from_json({"family": name})
        return P.profile_from_json(json.loads(name))
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot build profile from {spec!r}: {exc}") from None


def resolve_polytope(spec: str):
    from . import convexgeom as G

    name = spec[len("builtin:") :] if spec.startswith("builtin:") else spec
    try:
        return G.builtin_polytope(name)
    except KeyError:
        if spec.startswith("builtin:"):
            raise InputError(f"unknown built-in polytope {name!r}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    path = Path(spec)
    if not path.exists():
        raise InputError(f"{spec!r} is neither a built-in polytope nor an existing file")
    try:
        return G.polytope_from_json(json.loads(path.read_text()))
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read polytope {spec!r}: {exc}") from None


# ---------------------------------------------------------------------------
# commands; each returns (report dict, passed)


def _rule(args, n):
    from .sphere import sphere_rule

    return sphere_rule(n, args.resolution, args.seed)


def cmd_constants(args):
    from . import constants as C

    e = C.exponents(args.p, args.n)
    out = {
        "omega_n": C.unit_ball_volume(args.n),
        "I_p": C.ip_constant(args.p, args.n) if args.n >= 2 else None,
        "q": e.q,
        "p_prime": e.p_prime,
        "sharp_constant": C.sharp_constant(args.p, args.n),
    }
    if args.p > args.n:
        out["alpha"] = C.alpha_constant(args.p, args.n)
    return out, True


def cmd_energy(args):
    from .sphere import energy

    f = resolve_field(args.field, args.n, args.cells)
    res = energy(f, args.p, _rule(args, f.n), plus=args.plus)
    return {"value": res.value, "rule_tolerance": res.rule_tolerance, "degenerate": res.degenerate}, True


def cmd_chain(args):
    from .inequalities import verify_chain

    f = resolve_field(args.field, args.n, args.cells)
    rep = verify_chain(f, args.p, _rule(args, f.n))
    return rep.to_dict(), rep.passed


def cmd_prop31(args):
    from .inequalities import prop31_check

    f = resolve_field(args.field, args.n, args.cells)
    rep = prop31_check(f, args.p, _rule(args, f.n))
    return rep.to_dict(), rep.passed


def cmd_sweep(args):
    from .inequalities import default_family, sharpness_sweep

    family = args.family or default_family(args.p, args.n)
    family = {"power": "power_tail", "one-minus-power": "one_minus_power"}.get(family, family)
    try:
        curve = sharpness_sweep(family, args.p, args.n, args.steps)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return curve.to_dict(), curve.passed


def cmd_prop24(args):
    from .inequalities import prop24_check

    f = resolve_profile(args.profile)
    try:
        rep = prop24_check(f, args.p, args.n)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return rep.to_dict(), rep.passed


def cmd_hsp(args):
    from .inequalities import hsp_comparison

    f = resolve_profile(args.profile)
    try:
        rep = hsp_comparison(f, args.p, args.n)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return rep.to_dict(), rep.passed


def cmd_petty(args):
    from . import convexgeom as G

    K = resolve_polytope(args.polytope)
    res = G.petty_functional_result(K, _rule(args, K.n))
    out = {"kind": "petty", "polytope": K.name, "n": K.n, "petty_functional": res.value, "rule_tolerance": res.rule_tolerance}
    try:
        rhs = G.petty_rhs(K)
    except ValueError:
        out["volume"] = "volume unavailable"
        return out, True
    margin = res.value - rhs
    out |= {"volume": G.polytope_volume(K), "rhs": rhs, "margin": margin}
    passed = margin >= -max(1e-3, res.rule_tolerance)
    out["verdict"] = "pass" if passed else "fail"
    return out, passed


def cmd_extremize(args):
    from .inequalities import extremizer_search

    res = extremizer_search(args.p, args.n, args.knots, args.budget, args.seed)
    out = {
        "kind": "extremize",
        "ratio": res.ratio,
        "evaluations": res.evaluations,
        "knots": res.knots,
        "values": res.values,
        "history": res.history,
        "verdict": "pass" if res.ratio <= 1 + 1e-8 else "fail",
    }
    return out, res.ratio <= 1 + 1e-8


def cmd_reproduce(args):
    from .reproduce import run_all

    results = run_all(Path(args.out) if args.out else None, only=args.only, progress=sys.stderr)
    summary = {r.key: {"title": r.title, "passed": r.passed, "seconds": r.seconds} for r in results}
    return {"kind": "reproduce", "criteria": summary}, all(r.passed for r in results)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affine-sobolev", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, rule=False, field=False):
        p.add_argument("--csv", action="store_true", help="flat CSV rows instead of JSON")
        p.add_argument("--threads", type=int, default=None, help="worker threads for linear algebra")
        if rule:
            p.add_argument("--resolution", type=int, default=None, help="sphere rule size")
            p.add_argument("--seed", type=int, default=0)
        if field:
            p.add_argument("--field", required=True, help="built-in name (e.g. cone2d) or binary file with .json sidecar")
            p.add_argument("--n", type=int, default=None, help="dimension for built-in fields")
            p.add_argument("--cells", type=int, default=None, help="cells per axis for built-in fields")
        return p

    p = common(sub.add_parser("constants", help="scalar constants for (p, n)"))
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n", type=int, required=True)

    p = common(sub.add_parser("energy", help="affine energy of a field"), rule=True, field=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--plus", action="store_true", help="use positive parts of directional derivatives")

    for name, hlp in (("chain", "full inequality chain for a field"), ("prop31", "penalty-factor rearrangement bound")):
        p = common(sub.add_parser(name, help=hlp), rule=True, field=True)
        p.add_argument("--p", type=float, required=True)

    p = common(sub.add_parser("sweep", help="sharpness sweep along a truncation family"))
    p.add_argument("--family", default=None, help="power_tail | log | one_minus_power (default by regime)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--steps", type=int, default=12)

    for name, hlp in (("prop24", "support-free sup bound for p > n"), ("hsp", "support-dependent bound for p > n")):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--profile", required=True, help="family name, inline JSON or JSON file")
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--n", type=int, required=True)

    p = common(sub.add_parser("petty", help="Petty projection functional of a polytope"), rule=True)
    p.add_argument("--polytope", required=True, help="built-in (square, cube3, ngon1024, ...) or JSON file")

    p = common(sub.add_parser("extremize", help="search for near-extremal profiles"))
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--knots", type=int, default=16)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = common(sub.add_parser("reproduce", help="run the acceptance suite"))
    p.add_argument("--out", default=None, help="directory for one JSON report per criterion")
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return ap


COMMANDS = {
    "constants": cmd_constants,
    "energy": cmd_energy,
    "chain": cmd_chain,
    "prop31": cmd_prop31,
    "sweep": cmd_sweep,
    "prop24": cmd_prop24,
    "hsp": cmd_hsp,
    "petty": cmd_petty,
    "extremize": cmd_extremize,
    "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        # must happen before numpy loads its BLAS
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("csv", "threads")}
    try:
        report, passed = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.csv:
        sys.stdout.write(_to_csv(report))
    else:
        doc = {"schema": SCHEMA, "version": __version__, "config": config, "report": report}
        sys.stdout.write(dumps(doc) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
