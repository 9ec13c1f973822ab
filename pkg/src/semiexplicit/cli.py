"""Command line entry point: ``python -m semiexplicit <command>``.

Exit codes: 0 success, 2 invalid arguments, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from typing import List, Optional

from . import harness
from .integrators import SchemeKind
from .linalg import NumericError
from .stability import stability_report

log = logging.getLogger("semiexplicit")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ValueError):
    pass


def _scalar(tok: str) -> float:
    tok = tok.strip()
    m = re.fullmatch(r"2\^(-?\d+)", tok)
    if m:
        return 2.0 ** int(m.group(1))
    return float(tok)


def parse_list(text: str) -> List[float]:
    """Comma list of numbers or ``2^k`` tokens; ``2^-2..2^-8`` expands to every power between."""
    out = []
    for part in text.split(","):
        m = re.fullmatch(r"\s*2\^(-?\d+)\.\.2\^(-?\d+)\s*", part)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            step = 1 if b >= a else -1
            out.extend(2.0**k for k in range(a, b + step, step))
        elif part.strip():
            out.append(_scalar(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def _float_list(text):
    try:
        return parse_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (CSV, report or directory)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized start vectors")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--ref-tau", type=_scalar, default=None, help="reference step size")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="semiexplicit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("converge-poro", parents=[common], help="FEM temporal convergence study")
    c.add_argument("--n", type=int, default=32)
    c.add_argument("--scheme", default="semi-explicit-2",
                   choices=[k.value for k in SchemeKind])
    c.add_argument("--taus", type=_float_list, default=list(harness.DEFAULT_PORO_TAUS))

    s = sub.add_parser("sweep-toy", parents=[common], help="(omega, tau) error sweep on the toy")
    s.add_argument("--order", type=int, choices=(2, 3), required=True)
    s.add_argument("--omegas", type=_float_list, default=list(harness.DEFAULT_OMEGAS))
    s.add_argument("--taus", type=_float_list, default=list(harness.DEFAULT_TOY_TAUS))
    s.add_argument("--no-richardson", action="store_true",
                   help="use the plain midpoint reference")

    st = sub.add_parser("stability", parents=[common], help="coupling and spectral radii")
    st.add_argument("--input", required=True, help="toy:<omega> | poro:<n> | <mtx directory>")
    st.add_argument("--csv", action="store_true", help="emit a CSV row instead of key = value")

    d = sub.add_parser("delay-compare", parents=[common],
                       help="distance of the delay solution to the undelayed reference")
    d.add_argument("--omega", type=_scalar, required=True)
    d.add_argument("--taus", type=_float_list, default=[2.0**-k for k in range(3, 8)])
    d.add_argument("--m", type=int, default=64)

    e = sub.add_parser("export-matrices", parents=[common], help="write FEM matrices (Matrix Market)")
    e.add_argument("--n", type=int, default=32)
    return p


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _load_input(source: str):
    kind, _, arg = source.partition(":")
    if kind == "toy" and arg:
        return harness.build_toy(_scalar(arg))
    if kind == "poro" and arg:
        return harness.build_poro_benchmark(int(arg))
    if os.path.isdir(source):
        return harness.load_matrices(source)
    raise UsageError(f"cannot interpret --input {source!r}")


def _converge_poro(a) -> None:
    system = harness.build_poro_benchmark(a.n)
    tab = harness.convergence_study(system, SchemeKind.parse(a.scheme), a.taus, ref_tau=a.ref_tau)
    log.info("slopes: p %.3f, u %.3f", tab.slope_p, tab.slope_u)
    _emit(tab.to_csv(), a.out)


def _sweep_toy(a) -> None:
    res = harness.omega_tau_sweep(a.order, a.omegas, a.taus,
                                  ref_tau=a.ref_tau or harness.TOY_REF_TAU,
                                  richardson=not a.no_richardson, threads=a.threads)
    log.info("stability boundary between %s and %s", *res.boundary())
    _emit(res.to_csv(), a.out)


def _stability(a) -> None:
    system = _load_input(a.input)
    rep = stability_report(system)
    _emit(rep.csv_header() + "\n" + rep.csv_row() + "\n" if a.csv else rep.as_text(), a.out)


def _delay_compare(a) -> None:
    cmp = harness.delay_compare(a.omega, a.taus, a.m)
    log.info("slope %.3f", cmp.slope)
    _emit(cmp.to_csv(), a.out)


def _export(a) -> None:
    if not a.out:
        raise UsageError("export-matrices needs --out <dir>")
    for path in harness.export_matrices(harness.build_poro_benchmark(a.n), a.out):
        log.info("wrote %s", path)


COMMANDS = {"converge-poro": _converge_poro, "sweep-toy": _sweep_toy, "stability": _stability,
            "delay-compare": _delay_compare, "export-matrices": _export}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
