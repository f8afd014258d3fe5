"""Command-line front end.

Exit codes: 0 success, 2 unreadable input (parse errors, usage errors),
3 violated precondition, 4 estimator disagreement in ``compare``,
5 I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from typing import IO, Any, Iterator, Sequence

import numpy as np

from rrextreme.extreme_estimator import EmptyAccumulatorError, ExtremeAccumulator, Kind, expm1_saturating
from rrextreme.reference_estimators import (
    KRONECKER_CAP,
    SizeCapError,
    build_transition_matrix,
    compare_dense,
    compare_equal_q,
)
from rrextreme.rr_mechanism import NoiseParam, noise_from_epsilon
from rrextreme.simulate import ConfigError, ExperimentConfig, parse_elements, simulate
from rrextreme.sketch_io import SketchFormatError, dump_json, dumps_sketch, format_number, load_sketches
from rrextreme.union_cardinality import encode_set, estimate_union, privatize_sketch

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_EQUIVALENCE = 4
EXIT_IO = 5

CONVOLUTION_CAP = 24
EQUIVALENCE_TOL = 1e-8
STREAM_CACHE_LIMIT = 4096


class InputParseError(ValueError):
    pass


class EquivalenceFailure(Exception):
    pass


def clamp(value: float, upper: float) -> float:
    return min(max(value, 0.0), upper)


# -- output -----------------------------------------------------------------


@contextlib.contextmanager
def _open_output(path: str) -> Iterator[IO[str]]:
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float, np.integer, np.floating)):
        return format_number(v)
    return str(v)


def _emit(rows: list[dict[str, Any]], fmt: str, out: IO[str], single: bool = False) -> None:
    if fmt == "json":
        out.write(dump_json(rows[0] if single else rows) + "\n")
        return
    header = list(rows[0])
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_csv_cell(row[k]) for k in header) + "\n")


@contextlib.contextmanager
def _open_input(path: str, binary: bool = False) -> Iterator[IO]:
    if path == "-":
        yield sys.stdin.buffer if binary else sys.stdin
    else:
        mode = "rb" if binary else "r"
        with open(path, mode) as fh:
            yield fh


# -- estimate-or / estimate-and ---------------------------------------------


def _parse_stream_line(line: bytes, lineno: int, kind: Kind) -> tuple[float, float]:
    try:
        text = line.decode("ascii").strip()
        bit_s, q_s = text.split(",")
        bit = int(bit_s)
        q = float(q_s)
    except ValueError:
        raise InputParseError(f"line {lineno}: expected 'bit,q', got {line!r}") from None
    if bit not in (0, 1) or bit_s.strip() not in ("0", "1"):
        raise InputParseError(f"line {lineno}: bit must be 0 or 1")
    try:
        noise = NoiseParam(q)
    except ValueError as exc:
        raise InputParseError(f"line {lineno}: {exc}") from None
    factor = (1.0 - q - bit) / (1.0 - 2.0 * q) if kind is Kind.OR else (bit - q) / (1.0 - 2.0 * q)
    return factor, math.log1p(noise.noise_term)


def stream_estimate(lines: Iterator[bytes], kind: Kind) -> tuple[ExtremeAccumulator, float]:
    """Single pass over ``bit,q`` lines; returns the accumulator and variance bound.

    Parsed lines are memoised by their raw bytes (bounded table), since
    real streams repeat a handful of distinct ``q`` values.
    """
    cache: dict[bytes, tuple[float, float]] = {}
    product = 1.0
    log_bound = 0.0
    count = 0
    for line in lines:
        count += 1
        entry = cache.get(line)
        if entry is None:
            entry = _parse_stream_line(line, count, kind)
            if len(cache) < STREAM_CACHE_LIMIT:
                cache[line] = entry
        product *= entry[0]
        log_bound += entry[1]
    return ExtremeAccumulator(kind, product, count), expm1_saturating(log_bound)


def cmd_estimate(args: argparse.Namespace, kind: Kind) -> int:
    with _open_input(args.input, binary=True) as fh:
        acc, bound = stream_estimate(iter(fh), kind)
    raw = acc.estimate()
    row = {
        "kind": kind.value,
        "raw": raw,
        "clamped": clamp(raw, 1.0),
        "count": acc.count,
        "variance_upper_bound": bound,
    }
    with _open_output(args.output) as out:
        _emit([row], args.format, out, single=True)
    return EXIT_OK


# -- sketches ---------------------------------------------------------------


def cmd_encode(args: argparse.Namespace) -> int:
    elements = parse_elements(",".join(args.elements)) if args.elements else ()
    sk = encode_set(elements, args.m)
    with _open_output(args.output) as out:
        out.write(dumps_sketch(sk) + "\n")
    return EXIT_OK


def _noise_from_args(args: argparse.Namespace) -> NoiseParam:
    if args.epsilon is not None:
        return noise_from_epsilon(args.epsilon)
    return NoiseParam(args.q)


def cmd_privatize(args: argparse.Namespace) -> int:
    noise = _noise_from_args(args)
    with _open_input(args.input) as fh:
        sketches = load_sketches(fh)
    if not sketches:
        raise SketchFormatError("no sketch in input")
    rng = np.random.default_rng(args.seed)
    noisy = [privatize_sketch(sk, noise, rng) for sk in sketches]
    with _open_output(args.output) as out:
        for sk in noisy:
            out.write(dumps_sketch(sk) + "\n")
    return EXIT_OK


def cmd_estimate_union(args: argparse.Namespace) -> int:
    sketches = []
    for path in args.inputs:
        with _open_input(path) as fh:
            sketches.extend(load_sketches(fh))
    est = estimate_union(sketches)
    row = {
        "cardinality": est.cardinality,
        "clamped": clamp(est.cardinality, float(est.m)),
        "variance_bound": est.variance_bound,
        "m": est.m,
        "sketches": len(sketches),
    }
    if args.per_position:
        row["per_position_estimates"] = est.per_position_estimates
    with _open_output(args.output) as out:
        if args.format == "csv" and args.per_position:
            row["per_position_estimates"] = " ".join(map(format_number, est.per_position_estimates))
        _emit([row], args.format, out, single=True)
    return EXIT_OK


# -- compare / simulate -----------------------------------------------------


def cmd_compare(args: argparse.Namespace) -> int:
    noise = NoiseParam(args.q)
    if noise.q == 0.0:
        raise ValueError("compare needs 0 < q < 1/2: the transition matrix is singular at q = 0")
    if args.n < 1:
        raise ValueError("n must be positive")
    if args.mode == "sum" and args.n > CONVOLUTION_CAP:
        raise SizeCapError(f"convolution comparison is capped at n={CONVOLUTION_CAP}")
    if args.mode == "dense" and args.n > KRONECKER_CAP:
        raise SizeCapError(f"dense comparison is capped at n={KRONECKER_CAP}")
    tm = build_transition_matrix(args.n, noise)
    rows = compare_equal_q(args.n, noise, tm) if args.mode == "sum" else compare_dense(args.n, noise, tm)
    with _open_output(args.output) as out:
        _emit(rows, args.format, out)
    worst = max(r["max_rel_diff"] for r in rows)
    if not worst <= EQUIVALENCE_TOL:
        raise EquivalenceFailure(f"estimators disagree: max relative difference {worst:.3g}")
    return EXIT_OK


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, Any] = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputParseError(f"{args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise InputParseError(f"{args.config}: config must be a flat JSON object")
    overrides = {
        "scenario": args.scenario,
        "m": args.m,
        "trials": args.trials,
        "seed": args.seed,
        "true_bits": args.bits,
        "sets": args.sets,
    }
    if args.q is not None:
        overrides["q"] = args.q[0] if len(args.q) == 1 else args.q
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(raw)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    summary = simulate(config, jobs=args.jobs)
    with _open_output(args.output) as out:
        _emit([summary.as_dict()], args.format, out, single=args.format == "json")
    if args.trials_output:
        upper = float(config.m) if config.scenario == "union" else 1.0
        rows = [
            {"trial": t, "raw": v, "clamped": clamp(float(v), upper)}
            for t, v in enumerate(summary.estimates)
        ]
        with _open_output(args.trials_output) as out:
            _emit(rows, "csv", out)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rrextreme",
        description="Unbiased OR/AND and union-cardinality estimation under randomized response.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, fmt: str) -> None:
        p.add_argument("--seed", type=int, default=None, help="64-bit unsigned seed")
        p.add_argument("--output", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", choices=("csv", "json"), default=fmt)

    p = sub.add_parser("encode", help="encode a set over {1..m} as a sketch")
    p.add_argument("--m", type=int, required=True, help="universe size")
    p.add_argument("elements", nargs="*", help="elements or ranges, e.g. 1 5-9")
    common(p, "json")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("privatize", help="apply randomized response to sketches")
    p.add_argument("input", nargs="?", default="-", help="JSON-lines sketches, '-' for stdin")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--q", type=float, help="flip probability in [0, 0.5)")
    g.add_argument("--epsilon", type=float, help="privacy budget; q = 1 / (1 + e^epsilon)")
    common(p, "json")
    p.set_defaults(func=cmd_privatize)

    for name, kind in (("estimate-or", Kind.OR), ("estimate-and", Kind.AND)):
        p = sub.add_parser(name, help=f"stream 'bit,q' lines and estimate their {kind.value.upper()}")
        p.add_argument("input", nargs="?", default="-", help="one 'bit,q' per line, '-' for stdin")
        common(p, "json")
        p.set_defaults(func=lambda a, k=kind: cmd_estimate(a, k))

    p = sub.add_parser("estimate-union", help="estimate the union size of privatized sketches")
    p.add_argument("inputs", nargs="+", help="JSON-lines files of privatized sketches")
    p.add_argument("--per-position", action="store_true", help="include per-position estimates")
    common(p, "json")
    p.set_defaults(func=cmd_estimate_union)

    p = sub.add_parser("compare", help="tabulate the three equal-q estimators")
    p.add_argument("--n", type=int, required=True, help="number of bits")
    p.add_argument("--q", type=float, required=True, help="shared flip probability, > 0")
    p.add_argument("--mode", choices=("sum", "dense"), default="sum",
                   help="one row per observed count, or per sequence via the dense matrix")
    common(p, "csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="Monte-Carlo check of mean and variance")
    p.add_argument("--config", help="flat JSON experiment config; flags override it")
    p.add_argument("--scenario", choices=("or-bits", "union"))
    p.add_argument("--bits", help="true bits for or-bits, e.g. 0,1")
    p.add_argument("--sets", action="append", help="set for union, e.g. 1-50 (repeat per party)")
    p.add_argument("--m", type=int, help="universe size for union")
    p.add_argument("--q", type=float, nargs="+", help="one q, or one per party")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it")
    p.add_argument("--trials-output", help="also write per-trial estimates (CSV)")
    common(p, "csv")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be a 64-bit unsigned integer")
    if args.command == "privatize" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (InputParseError, SketchFormatError) as exc:
        print(f"rrextreme: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EquivalenceFailure as exc:
        print(f"rrextreme: {exc}", file=sys.stderr)
        return EXIT_EQUIVALENCE
    except OSError as exc:
        print(f"rrextreme: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, EmptyAccumulatorError, ConfigError) as exc:
        print(f"rrextreme: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
