"""Command-line interface: ``polylat <command> ...``.

Every command writes its result to stdout (or to ``-o``) and exits 0.  On
failure it prints ``{"error": ..., "message": ...}`` to stderr and exits
nonzero (2 for bad flags, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import points as pts
from .cbc import CbcParams, cbc_fast, cbc_slow, default_mprime
from .criterion import b_dual_oracle, b_points, bound_table, lambda_grid
from .qmc import convergence_study, integrate, make_integrand
from .rulefile import RuleFile, parse_weight_spec
from .selftest import constants_table, run_all


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _m_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        return [int(x) for x in text.split(",")]
    return list(range(int(lo), int(hi) + 1))


def cmd_construct(args, out) -> int:
    weights = parse_weight_spec(args.weights, args.s)
    mprime = args.mprime if args.mprime is not None else default_mprime(args.alpha, args.m)
    params = CbcParams(args.s, args.m, mprime, args.alpha, weights)
    rule, report = (cbc_slow if args.slow else cbc_fast)(params)
    rf = RuleFile(rule, report.method, timestamp=args.timestamp)
    rep = report.as_dict()
    if args.output:
        Path(args.output).write_text(rf.to_json())
        out.write(_dump(rep))
    else:
        out.write(_dump({"rule": rf.to_dict(), "report": rep}))
    return 0


def cmd_points(args, out) -> int:
    rule = RuleFile.load(args.rule).rule
    x = pts.generate_point_set(rule)
    if args.seed is not None:
        x, _ = pts.randomize(rule, args.seed, args.precision, index=args.shift_index)
    elif args.fold:
        x = pts.tent_transform(x)
    if args.format == "bin":
        if not args.output:
            raise UsageError("--format bin needs -o")
        Path(args.output).write_bytes(pts.points_to_bytes(x, rule.m, rule.mprime))
        return 0
    if args.output:
        with open(args.output, "w") as fh:
            pts.write_csv(x, fh)
    else:
        pts.write_csv(x, out)
    return 0


def cmd_criterion(args, out) -> int:
    rule = RuleFile.load(args.rule).rule
    doc = {
        "value": b_points(rule).value,
        "lambda_bounds": bound_table(rule.alpha, rule.weights, rule.m, rule.mprime, lambda_grid(rule.alpha, args.grid_step)),
    }
    if args.oracle is not None:
        o = b_dual_oracle(rule, args.oracle)
        doc.update({"oracle_value": o.value, "tail": o.tail, "K_max": o.K_max})
    out.write(_dump(doc))
    return 0


def cmd_integrate(args, out) -> int:
    rule = RuleFile.load(args.rule).rule
    f = make_integrand(args.fn, rule.s)
    res = integrate(rule, f, args.R, args.seed, args.precision, threads=args.threads)
    out.write(
        _dump(
            {
                "fn": f.name,
                "estimate": res.estimate,
                "stderr": res.stderr,
                "exact": f.exact,
                "rms_error": res.rms_error,
                "R": res.R,
                "seed": res.seed,
            }
        )
    )
    return 0


def cmd_convergence(args, out) -> int:
    weights = parse_weight_spec(args.weights, args.s)
    study = convergence_study(
        args.s,
        args.alpha,
        weights,
        _m_range(args.m),
        R=args.R,
        seed=args.seed,
        integrand=args.fn,
        kernel_mse=not args.no_mse,
        threads=args.threads,
    )
    if args.output:
        Path(args.output).write_text(study.to_csv())
        out.write(_dump(study.slopes))
    else:
        out.write(study.to_csv())
    return 0


def cmd_selftest(args, out) -> int:
    if args.constants:
        out.write(_dump(constants_table()))
        return 0
    results = run_all()
    for r in results:
        out.write(json.dumps(r, sort_keys=True) + "\n")
    return 0 if all(r["passed"] for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polylat", description="Higher order polynomial lattice rules over GF(2).")
    p.add_argument("--threads", type=int, default=1, help="workers for internal parallel maps")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("construct", help="build a generating vector by CBC")
    c.add_argument("-s", type=int, required=True)
    c.add_argument("-m", type=int, required=True)
    c.add_argument("--alpha", type=int, default=2)
    c.add_argument("--weights", required=True, help="e.g. prod:0.5^j, prod:1*j^-2, general:@w.json")
    c.add_argument("--mprime", type=int, help="modulus degree (default ceil(alpha m / 2))")
    c.add_argument("--slow", action="store_true", help="exhaustive search instead of the fast algorithm")
    c.add_argument("--timestamp", help="provenance timestamp to record (none by default)")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_construct)

    c = sub.add_parser("points", help="export a point set")
    c.add_argument("--rule", required=True)
    c.add_argument("--format", choices=("csv", "bin"), default="csv")
    c.add_argument("--seed", type=int, help="apply a random shift and the tent fold")
    c.add_argument("--shift-index", type=int, default=0)
    c.add_argument("--precision", type=int, default=pts.DEFAULT_SHIFT_PRECISION)
    c.add_argument("--fold", action="store_true", help="tent fold without a shift")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_points)

    c = sub.add_parser("criterion", help="quality criterion and bounds of a rule")
    c.add_argument("--rule", required=True)
    c.add_argument("--oracle", type=int, metavar="KMAX", help="also run the dual-lattice oracle")
    c.add_argument("--grid-step", type=float, default=0.02)
    c.set_defaults(func=cmd_criterion)

    c = sub.add_parser("integrate", help="randomized QMC integration of a test function")
    c.add_argument("--rule", required=True)
    c.add_argument("--fn", default="b2prod")
    c.add_argument("-R", type=int, default=16)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--precision", type=int, default=pts.DEFAULT_SHIFT_PRECISION)
    c.set_defaults(func=cmd_integrate)

    c = sub.add_parser("convergence", help="error study over a range of m")
    c.add_argument("-s", type=int, required=True)
    c.add_argument("--alpha", type=int, default=2)
    c.add_argument("--m", required=True, help="range like 6..12 or list like 6,8,10")
    c.add_argument("--weights", required=True)
    c.add_argument("-R", type=int, default=16)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--fn", default="b2prod")
    c.add_argument("--no-mse", action="store_true", help="skip the O(N^2) kernel error")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_convergence)

    c = sub.add_parser("selftest", help="run the built-in checks")
    c.add_argument("--constants", action="store_true", help="print the smoothness constants instead")
    c.set_defaults(func=cmd_selftest)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args, out)
    except UsageError as exc:
        err.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        err.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
