"""``mimorelay`` command-line entry point.

Exit status: 0 on success, 1 on usage or config errors, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

from .. import bounds
from ..cmatrix import LinAlgContractError, SingularChannelError, SvdConvergenceError
from ..quantizer import CodebookConfigError
from ..ratesim import NumericalFailure
from .config import ConfigError, db_to_linear, load_config
from .figures import FIGURES, reproduce_figure
from .runner import ScenarioAborted, run_scenario
from .selftest import run_selftest

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (NumericalFailure, SingularChannelError, SvdConvergenceError, ArithmeticError, FloatingPointError)
USAGE_ERRORS = (ConfigError, CodebookConfigError, LinAlgContractError, ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; 2 is reserved for numerical failure here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_system_args(p, bits=False):
    p.add_argument("--M", type=int, required=True, help="BS antennas")
    p.add_argument("--N", type=int, required=True, help="relay antennas (= users)")
    p.add_argument("--P1-dB", type=float, required=True, dest="P1_dB")
    p.add_argument("--P2-dB", type=float, required=True, dest="P2_dB")
    if bits:
        p.add_argument("--B1", type=float, required=True, help="bits per V column ('inf' for ideal)")
        p.add_argument("--B2", type=float, required=True, help="bits per user ('inf' for ideal)")


def build_parser():
    p = _Parser(prog="mimorelay", description="Limited-feedback MIMO relay broadcast experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a scenario config and write its CSV")
    s.add_argument("config")
    s.add_argument("--workers", type=int, default=None, help="override the config's worker count")

    b = sub.add_parser("bounds", help="evaluate the rate-loss bound and ceilings")
    _add_system_args(b, bits=True)
    b.add_argument("--trials", type=int, default=20000, help="Monte Carlo trials for the B1-only term")
    b.add_argument("--seed", type=int, default=0)

    sb = sub.add_parser("scale-bits", help="feedback bits that hold the loss at (1/2) log2 b per user")
    _add_system_args(sb)
    sb.add_argument("--b", type=float, default=2.0)
    sb.add_argument("--theta", type=float, default=0.5)

    t = sub.add_parser("theta-opt", help="loss split minimizing total feedback")
    t.add_argument("--M", type=int, required=True)
    t.add_argument("--N", type=int, required=True)

    f = sub.add_parser("figure", help="regenerate a figure's data and gnuplot script")
    f.add_argument("id", type=int)
    f.add_argument("--out", default=".")
    f.add_argument("--trials", type=int, default=20000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--workers", type=int, default=1)

    sub.add_parser("selftest", help="run the invariant checks")
    return p


def _bits(x):
    return None if math.isinf(x) else int(x)


def _fmt(x):
    return "inf" if x is None else repr(x)


def cmd_simulate(args):
    s = load_config(args.config)
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        s = replace(s, workers=args.workers)
    rows = run_scenario(s)
    print(f"wrote {len(rows)} rows to {s.output_dir / (s.name + '.csv')}")
    return EXIT_OK


def cmd_bounds(args):
    M, N = args.M, args.N
    P1, P2 = db_to_linear(args.P1_dB), db_to_linear(args.P2_dB)
    B1, B2 = _bits(args.B1), _bits(args.B2)
    if B1 is not None and args.B1 != B1 or B2 is not None and args.B2 != B2:
        raise UsageError("B1 and B2 must be integers or inf")
    high = bounds.high_snr_bound(M, N, P1, P2, B1, B2)
    first = 0.0 if B1 is None else bounds.rate_loss_bound_first_term(M, N, B1, args.trials, args.seed)
    print(f"bound_high_snr {high!r}")
    print(f"first_term_est {first!r}")
    print(f"bound_full_est {first + high!r}")
    print(f"ceiling_constant {bounds.ceiling_constant(M, N)!r}")
    print(f"R_U1 {_fmt(None if B1 is None else bounds.ceiling_R_U1(M, N, B1))}")
    print(f"R_U2 {_fmt(None if B2 is None else bounds.ceiling_R_U2(M, N, B2))}")
    return EXIT_OK


def cmd_scale_bits(args):
    M, N = args.M, args.N
    P1, P2 = db_to_linear(args.P1_dB), db_to_linear(args.P2_dB)
    plan = bounds.scale_bits(M, N, P1, P2, args.b, args.theta)
    for name in ("B1_exact", "B2_exact", "B1", "B2", "alpha", "clamped"):
        print(f"{name} {getattr(plan, name)!r}")
    print(f"bound_at_exact {bounds.high_snr_bound(M, N, P1, P2, plan.B1_exact, plan.B2_exact)!r}")
    print(f"bound_at_integer {bounds.high_snr_bound(M, N, P1, P2, plan.B1, plan.B2)!r}")
    print(f"sum_feedback {bounds.sum_feedback(M, N, P1, P2, args.b, args.theta)!r}")
    if args.theta == 0.5:
        a1, a2 = bounds.bits_db_approx(M, N, P1, args.P2_dB, args.b)
        print(f"B1_db_approx {a1!r}")
        print(f"B2_db_approx {a2!r}")
    return EXIT_OK


def cmd_theta_opt(args):
    if args.N < 2 or args.M < args.N:
        raise UsageError("need M >= N >= 2")
    print(f"theta_opt {bounds.optimal_theta(args.M, args.N)!r}")
    return EXIT_OK


def cmd_figure(args):
    if args.id not in FIGURES:
        raise UsageError(f"unknown figure {args.id}; choose from {', '.join(map(str, FIGURES))}")
    if args.trials < 1 or args.workers < 1:
        raise UsageError("--trials and --workers must be >= 1")
    res = reproduce_figure(args.id, args.out, args.trials, args.seed, args.workers)
    print(f"wrote {res.csv_path} and {res.script_path}")
    return EXIT_OK


def cmd_selftest(args):
    return EXIT_OK if run_selftest() else EXIT_NUMERIC


COMMANDS = {
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "scale-bits": cmd_scale_bits,
    "theta-opt": cmd_theta_opt,
    "figure": cmd_figure,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ScenarioAborted as exc:
        print(f"error: {exc}: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.cause, NUMERIC_ERRORS) else EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
