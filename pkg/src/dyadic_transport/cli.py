"""Command-line front end.

Exit codes: 0 success, 2 invalid flags, 3 a freshly built partition failed
its own verification, 4 unreadable partition file, 5 a verification check
failed, 6 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from fractions import Fraction

from .io import (
    PartitionFormatError,
    dump_partition,
    format_rational,
    load_partition,
    write_table,
)
from .partition import THEOREM_CONSTANT, build_partition, verify_partition
from .sequence import MAX_DIM, prefix
from .transport import (
    MAX_ORACLE_PAIRS,
    OracleBudgetError,
    obstruction_scan,
    theorem_bound,
    volumetric_lower_winfty,
    winfty_oracle_grid,
    winfty_upper,
)

EXIT_FLAGS = 2
EXIT_BUILD = 3
EXIT_PARSE = 4
EXIT_CHECK = 5
EXIT_BUDGET = 6


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _dimension(text: str) -> int:
    v = _positive_int(text)
    if not 2 <= v <= MAX_DIM:
        raise argparse.ArgumentTypeError(f"d must lie in [2, {MAX_DIM}], got {v}")
    return v


def _p_value(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if math.isnan(v) or v < 1:
        raise argparse.ArgumentTypeError("p must lie in [1, inf]")
    return v


def _constant(text: str) -> Fraction:
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational constant: {text!r}")
    if v <= 0:
        raise argparse.ArgumentTypeError("constant must be positive")
    return v


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fp:
            yield fp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadic-transport",
        description="Exact transport partitions and Wasserstein bounds for the dyadic digital sequence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_flag="--n"):
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        if n_flag == "--n":
            p.add_argument("--n", type=_positive_int, required=True, help="prefix length N")
        else:
            p.add_argument("--n-max", type=_positive_int, required=True)

    p = sub.add_parser("gen", help="write the first N sequence points")
    p.add_argument("--d", type=_dimension, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    common(p)

    p = sub.add_parser("partition", help="build, self-verify and serialize a partition")
    p.add_argument("--d", type=_dimension, required=True)
    p.add_argument("--constant", type=_constant, default=Fraction(THEOREM_CONSTANT))
    common(p)

    p = sub.add_parser("verify", help="verify a serialized partition")
    p.add_argument("path")
    p.add_argument("--oblivious", action="store_true", help="force the all-pairs disjointness check")
    p.add_argument("--constant", type=_constant, default=Fraction(THEOREM_CONSTANT))

    p = sub.add_parser("bounds", help="certificate, theorem bound and volumetric lower bound")
    p.add_argument("--d", type=_dimension, required=True)
    p.add_argument("--p", type=_p_value, default=math.inf)
    common(p)

    p = sub.add_parser("oracle", help="bounds plus the grid bottleneck oracle")
    p.add_argument("--d", type=_dimension, required=True)
    p.add_argument("--grid", type=_positive_int, required=True)
    common(p)

    p = sub.add_parser("obstruction", help="N * W_1 for the one-dimensional sequence")
    common(p, "--n-max")

    p = sub.add_parser("rates", help="N^(1/d)-normalised bounds over N = 1, 2, 4, ...")
    p.add_argument("--d", type=_dimension, required=True)
    common(p, "--n-max")
    return parser


def _bounds_row(N: int, d: int, g: int | None = None) -> dict:
    P = build_partition(N, d)
    cert = winfty_upper(P)
    row = {
        "N": N,
        "value": cert.radius,
        "lower": volumetric_lower_winfty(N, d),
        "upper": theorem_bound(N, d),
    }
    if g is not None:
        row["oracle"], row["error"] = winfty_oracle_grid([c.point for c in P.cells], g)
    return row


def cmd_gen(args) -> int:
    pts = prefix(args.n, args.d)
    with _output(args.out) as fp:
        if args.format == "json":
            json.dump(
                [
                    {
                        "n": p.n,
                        "coords": [format_rational(v) for v in p.coords],
                        "floats": list(p.as_floats()),
                    }
                    for p in pts
                ],
                fp,
            )
            fp.write("\n")
        else:
            d = args.d
            fp.write(
                ",".join(["n"] + [f"x{j}" for j in range(1, d + 1)] + [f"x{j}_float" for j in range(1, d + 1)])
                + "\n"
            )
            for p in pts:
                exact = [format_rational(v) for v in p.coords]
                floats = [f"{v:.12g}" for v in p.as_floats()]
                fp.write(",".join([str(p.n)] + exact + floats) + "\n")
    return 0


def _print_report(report, stream) -> None:
    print(f"mode: {report.mode}", file=stream)
    for line in report.lines():
        print(line, file=stream)


def cmd_partition(args) -> int:
    P = build_partition(args.n, args.d)
    report = verify_partition(P, constant=args.constant)
    _print_report(report, sys.stderr)
    theorem_failures = [c for c in report.failures() if not c.name.startswith("radius(c=")]
    if theorem_failures:
        return EXIT_BUILD
    with _output(args.out) as fp:
        dump_partition(P, fp)
    return 0


def cmd_verify(args) -> int:
    try:
        with open(args.path) as fp:
            P = load_partition(fp)
    except (OSError, PartitionFormatError, ValueError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    mode = "oblivious" if args.oblivious else "auto"
    report = verify_partition(P, mode=mode, constant=args.constant)
    _print_report(report, sys.stdout)
    theorem_failures = [c for c in report.failures() if not c.name.startswith("radius(c=")]
    return EXIT_CHECK if theorem_failures else 0


def cmd_bounds(args) -> int:
    with _output(args.out) as fp:
        write_table([_bounds_row(args.n, args.d)], fp)
    return 0


def cmd_oracle(args) -> int:
    row = _bounds_row(args.n, args.d, args.grid)
    with _output(args.out) as fp:
        write_table([row], fp)
    return 0


def cmd_obstruction(args) -> int:
    table = obstruction_scan(args.n_max)
    rows = []
    for blk in table.blocks:
        rows.append({"N": blk.start, "value": table.values[blk.start - 1]})
        if blk.argmax != blk.start:
            rows.append({"N": blk.argmax, "value": blk.value})
    with _output(args.out) as fp:
        write_table(rows, fp)
    return 0


def cmd_rates(args) -> int:
    d = args.d
    rows = []
    N = 1
    while N <= args.n_max:
        row = _bounds_row(N, d)
        scale = N ** (1.0 / d)
        rows.append(
            {
                "N": N,
                "value": row["value"] * scale,
                "lower": row["lower"] * scale,
                "upper": THEOREM_CONSTANT * math.sqrt(d),
            }
        )
        N *= 2
    with _output(args.out) as fp:
        write_table(rows, fp)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "partition": cmd_partition,
    "verify": cmd_verify,
    "bounds": cmd_bounds,
    "oracle": cmd_oracle,
    "obstruction": cmd_obstruction,
    "rates": cmd_rates,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "obstruction" and args.n_max < 2:
        parser.error("--n-max must be >= 2")
    if args.command == "oracle":
        N, G = args.n, args.grid**args.d
        if N * G > MAX_ORACLE_PAIRS:
            print(f"oracle budget exceeded: N * g^d = {N * G} > {MAX_ORACLE_PAIRS}", file=sys.stderr)
            return EXIT_BUDGET
    try:
        return COMMANDS[args.command](args)
    except OracleBudgetError as exc:
        print(f"oracle budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
