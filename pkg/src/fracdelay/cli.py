"""Command-line entry point: ``fracdelay {study,gronwall-verify,selftest}``.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .study import (
    COUPLINGS,
    MODES,
    ConfigError,
    StudyError,
    gronwall_verify,
    load_config,
    run_study,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracdelay", description="Delayed time-fractional reaction-diffusion solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every solver run")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    st = sub.add_parser("study", help="run a convergence study")
    st.add_argument("--config", help="flat key = value config file")
    st.add_argument("--problem")
    st.add_argument("--alpha", type=float)
    st.add_argument("--degree", type=int, choices=(1, 2))
    st.add_argument("--mode", choices=MODES)
    st.add_argument("--levels", help="comma-separated refinement levels, e.g. 5,10,20,40")
    st.add_argument("--divisions", type=int, help="fixed mesh divisions for temporal studies")
    st.add_argument("--m-tau", type=int, dest="m_tau", help="fixed delay steps for spatial studies")
    st.add_argument("--coupling", choices=COUPLINGS)
    st.add_argument("--tol", type=float, help="relative CG tolerance")
    st.add_argument("--error-ref", dest="error_reference", choices=("exact", "ritz"))
    st.add_argument("--jobs", type=int, help="levels solved in parallel")
    st.add_argument("--out", help="output stem; writes <out>.csv and <out>.json")
    st.add_argument("--expect-order", nargs=2, type=float, metavar=("LO", "HI"),
                    help="exit 1 unless the finest observed order lies in [LO, HI]")

    gv = sub.add_parser("gronwall-verify", help="check the Grönwall bound against the extremal recursion")
    gv.add_argument("--alpha", type=float, default=0.5)
    gv.add_argument("--dt", type=float, default=None, help="time step (default dt*/2)")
    for i, default in enumerate((1.0, 0.5, 0.5, 0.5, 0.5), 1):
        gv.add_argument(f"--lambda{i}", type=float, default=default)
    gv.add_argument("--m", type=int, default=2)
    gv.add_argument("--n", type=int, default=200)
    gv.add_argument("--trials", type=int, default=100)
    gv.add_argument("--seed", type=int, default=0)
    gv.add_argument("--f-scale", type=float, default=1.0, dest="f_scale")

    sub.add_parser("selftest", help="run the quick property suites")
    return parser


def _cmd_study(args) -> int:
    overrides = {k: getattr(args, k) for k in (
        "problem", "alpha", "degree", "mode", "levels", "divisions", "m_tau",
        "coupling", "tol", "error_reference", "jobs", "out",
    )}
    config = load_config(args.config, **overrides)
    try:
        report = run_study(config)
    except StudyError as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    meta = report.metadata
    print(f"{meta['problem']} alpha={meta['alpha']} P{meta['degree']} {meta['mode']} ({meta['seconds']:.1f}s)")
    print(report.format_table())
    if args.expect_order is not None:
        lo, hi = args.expect_order
        q = report.finest_order
        ok = q is not None and lo <= q <= hi
        print(f"{'PASS' if ok else 'FAIL'}: finest order {q} expected in [{lo}, {hi}]")
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def _cmd_gronwall(args) -> int:
    lambdas = (args.lambda1, args.lambda2, args.lambda3, args.lambda4, args.lambda5)
    rep = gronwall_verify(args.alpha, args.dt, lambdas, args.m, args.n, args.trials, args.seed, args.f_scale)
    print(f"alpha={rep.alpha} dt={rep.dt:.6g} dt*={rep.dt_star:.6g} m={rep.m} n={rep.n} trials={rep.trials}")
    print(f"{'PASS' if rep.passed else 'FAIL'}: max oracle/bound ratio {rep.max_ratio:.6e}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_selftest(args) -> int:
    from .selftest import run_all

    failed = 0
    for res in run_all():
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}")
        failed += not res.passed
    return EXIT_OK if failed == 0 else EXIT_FAIL


COMMANDS = {"study": _cmd_study, "gronwall-verify": _cmd_gronwall, "selftest": _cmd_selftest}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
