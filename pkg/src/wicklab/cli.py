"""``wicklab`` command line.

Every command writes one JSON object (or a CSV table) to ``--out`` or stdout.
Output depends only on the arguments, so identical invocations produce
byte-identical files.  Wall-clock timings are added only with ``--timings``.

Exit codes: 0 ok, 1 a ``verify`` criterion failed, 2 bad input or
expression, 3 a cap was exceeded, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import default_workers
from .diagrams import (
    DEFAULT_TRAVERSAL_BUDGET,
    WickMomentSpec,
    convergence_study,
    gaussian_wick_moment,
    term_to_dict,
    wick_moment_closed,
    wick_moment_oracle,
    wick_moment_traversal,
)
from .errors import CapacityError, ExprSyntaxError, WicklabError
from .funcgrid import dump_csv, load_csv, parse_expr, sample, to_source
from .hermite import DEFAULT_GRAM_RESOLUTION, MultiIndexCoeffs, cosine_basis, kform_limit_check
from .moments import (
    DEFAULT_ORACLE_CAP,
    McConfig,
    MomentSpec,
    moment_bruteforce,
    moment_montecarlo,
    moment_partition_formula,
)
from .partitions import DEFAULT_PARTITION_CAP
from .verify import DEFAULT_SEED, format_line, run_checks
from .wick import bernoulli_moments, gaussian_moments, noise_moments, stochastic_exponent_partial, wick_polynomial

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3, 4

CONVERGE_COLUMNS = ["n", "bernoulli", "gaussian", "abs_error", "error_times_n"]
HERMITE_COLUMNS = [
    "n",
    "mean",
    "mean_se",
    "mean_limit",
    "second",
    "second_limit",
    "second_gap",
    "third",
    "third_se",
    "third_limit",
    "third_gap",
]


class UsageError(WicklabError):
    pass


def _factor(text: str) -> tuple[str, int]:
    """``EXPR:POWER``; the power is split off at the last colon."""
    expr, sep, power = text.rpartition(":")
    if not sep or not expr:
        raise argparse.ArgumentTypeError(f"expected EXPR:POWER, got {text!r}")
    try:
        q = int(power)
    except ValueError:
        raise argparse.ArgumentTypeError(f"power must be an integer in {text!r}") from None
    if q < 1:
        raise argparse.ArgumentTypeError(f"power must be positive in {text!r}")
    return expr, q


def _int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or any(v < 1 for v in out):
        raise argparse.ArgumentTypeError(f"grid sizes must be positive, got {text!r}")
    return out


def _clean(value):
    """Plain Python types for JSON, recursively."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def _json_text(obj: dict) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(row[c])) if not isinstance(row[c], (int, np.integer)) else int(row[c]) for c in columns])
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _echo(args, keys: list[str]) -> dict:
    return {"command": args.command, **{k: getattr(args, k) for k in keys}}


def _expressions(pairs) -> list[tuple[str, int]]:
    # Canonical text so the echo does not depend on spacing in the input.
    return [(to_source(parse_expr(e)), q) for e, q in pairs]


def _require(args, name: str, flag: str) -> None:
    if not getattr(args, name):
        raise UsageError(f"{args.command} needs at least one {flag}")


def _cmd_moments(args) -> dict:
    _require(args, "factor", "--factor")
    pairs = _expressions(args.factor)
    spec = MomentSpec(tuple((sample(e, args.n, 1), q) for e, q in pairs))
    engines = ["bruteforce", "formula", "mc"] if args.engine == "all" else [args.engine]
    values: dict = {}
    timings: dict = {}
    for eng in engines:
        start = time.perf_counter()
        if eng == "bruteforce":
            values["bruteforce"] = moment_bruteforce(spec, args.oracle_cap, args.workers)
        elif eng == "formula":
            values["formula"] = moment_partition_formula(spec, args.partition_cap)
        else:
            mean, se = moment_montecarlo(spec, McConfig(args.samples, args.seed), args.workers)
            values["mc"] = {"mean": mean, "se": se}
        timings[eng] = time.perf_counter() - start
    out = {"config": _echo(args, ["n", "engine", "seed", "samples"]) | {"factors": pairs}, "values": values}
    if args.timings:
        out["timings"] = timings
    return out


def _cmd_wick(args) -> dict:
    if args.base == "noise":
        if not args.expr:
            raise UsageError("--base noise needs --expr")
        f = sample(args.expr, args.n, 1)
        moments = noise_moments(f, max(args.degree, args.series))
    elif args.base == "bernoulli":
        moments = bernoulli_moments(max(args.degree, args.series))
    else:
        moments = gaussian_moments(max(args.degree, args.series))
    poly = wick_polynomial(moments[: args.degree + 1])
    out = {
        "config": _echo(args, ["base", "n", "expr", "degree"]),
        "moments": [float(m) for m in moments[: args.degree + 1]],
        "coefficients": [float(c) for c in poly.coeffs],
        "mean": float(poly.mean()),
    }
    if args.alpha is not None:
        out["stochastic_exponent"] = {
            "alpha": args.alpha,
            "x": args.x,
            "terms": args.series,
            "partial_sum": stochastic_exponent_partial(args.alpha, moments, args.x, args.series),
        }
    return out


def _cmd_diagrams(args) -> dict:
    _require(args, "wick", "--wick")
    pairs = _expressions(args.wick)
    spec = WickMomentSpec(tuple((sample(e, args.n, 1), q) for e, q in pairs))
    engines = ["traversal", "closed", "oracle", "gaussian"] if args.engine == "all" else [args.engine]
    values: dict = {}
    timings: dict = {}
    terms = None
    for eng in engines:
        start = time.perf_counter()
        if eng == "traversal":
            values["traversal"], terms = wick_moment_traversal(spec, args.partition_cap, args.traversal_budget, args.terms)
        elif eng == "closed":
            values["closed"] = wick_moment_closed(spec, args.partition_cap)
        elif eng == "oracle":
            values["oracle"] = wick_moment_oracle(spec, args.oracle_cap, args.workers)
        else:
            values["gaussian"] = gaussian_wick_moment(spec, cap=args.partition_cap)
        timings[eng] = time.perf_counter() - start
    total = values.get("traversal", values.get("closed", values.get("oracle", values.get("gaussian"))))
    out = {"config": _echo(args, ["n", "engine"]) | {"wick": pairs}, "total": total, "values": values}
    if terms is not None and args.terms:
        out["term_count"] = len(terms)
        out["terms"] = [term_to_dict(t) for t in terms]
    if args.timings:
        out["timings"] = timings
    return out


def _cmd_converge(args):
    _require(args, "wick", "--wick")
    pairs = _expressions(args.wick)
    rows = convergence_study(pairs, args.grid, quadrature=args.quadrature, cap=args.partition_cap)
    if args.format == "csv":
        return rows, CONVERGE_COLUMNS
    return {"config": _echo(args, ["grid", "quadrature"]) | {"wick": pairs}, "rows": rows}


def _cmd_hermite(args):
    basis = cosine_basis(args.basis_size)
    if any(i < 1 or i > args.basis_size for i in args.index):
        raise UsageError(f"--index entries must lie in 1..{args.basis_size}")
    coeffs = MultiIndexCoeffs.product(basis, args.index)
    gram = np.eye(args.basis_size) if args.exact_gram else None
    rows = kform_limit_check(coeffs, args.grid, McConfig(args.samples, args.seed), gram=gram)
    if args.format == "csv":
        return rows, HERMITE_COLUMNS
    return {
        "config": _echo(args, ["basis_size", "index", "grid", "samples", "seed", "exact_gram"]) | {"basis": basis},
        "rows": rows,
    }


def _cmd_sample(args):
    if args.csv_in:
        g = load_csv(args.csv_in)
    else:
        if not args.expr:
            raise UsageError("sample needs --expr or --csv-in")
        g = sample(args.expr, args.n, args.arity)
    if args.format == "csv":
        return dump_csv(g)
    return {"config": _echo(args, ["n", "expr", "arity"]), "n": g.n, "arity": g.arity, "values": g.values}


def _cmd_verify(args):
    results = run_checks(args.seed, args.only)
    for r in results:
        print(format_line(r), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    report = {
        "config": _echo(args, ["seed", "only"]),
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict(args.timings) for r in results],
    }
    return report


COMMANDS = {
    "moments": _cmd_moments,
    "wick": _cmd_wick,
    "diagrams": _cmd_diagrams,
    "converge": _cmd_converge,
    "hermite": _cmd_hermite,
    "sample": _cmd_sample,
    "verify": _cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--workers", type=int, default=None, help="worker threads (default $WICKLAB_THREADS or CPU count)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
    common.add_argument("--oracle-cap", type=int, default=DEFAULT_ORACLE_CAP, help="largest n for 2^n enumeration")
    common.add_argument("--partition-cap", type=int, default=DEFAULT_PARTITION_CAP, help="largest total degree K")
    common.add_argument("--traversal-budget", type=int, default=DEFAULT_TRAVERSAL_BUDGET, help="max diagrams enumerated")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte reproducibility)")

    parser = argparse.ArgumentParser(prog="wicklab", description="Bernoulli-noise Wick calculus experiments.")
    parser.add_argument("--version", action="version", version=f"wicklab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common], help="E[phi(f1)^q1 ... phi(fj)^qj]")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--factor", type=_factor, action="append", default=[], metavar="EXPR:POWER")
    p.add_argument("--engine", choices=["all", "bruteforce", "formula", "mc"], default="all")

    p = sub.add_parser("wick", parents=[common], help="Wick polynomial P_m and stochastic exponent partial sums")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--base", choices=["noise", "bernoulli", "gaussian"], default="noise")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--expr")
    p.add_argument("--alpha", type=float)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--series", type=int, default=0, help="terms in the stochastic exponent partial sum")

    p = sub.add_parser("diagrams", parents=[common], help="E[:phi^n1(f1): ... :phi^nN(fN):] by diagrams")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--wick", type=_factor, action="append", default=[], metavar="EXPR:POWER")
    p.add_argument("--engine", choices=["all", "traversal", "closed", "oracle", "gaussian"], default="all")
    p.add_argument("--no-terms", dest="terms", action="store_false", help="omit the per-diagram dump")

    p = sub.add_parser("converge", parents=[common], help="Bernoulli vs Gaussian over a grid of n")
    p.add_argument("--wick", type=_factor, action="append", default=[], metavar="EXPR:POWER")
    p.add_argument("--grid", type=_int_list, default=[8, 16, 32, 64])
    p.add_argument("--quadrature", action="store_true", help="Gaussian side from adaptive quadrature")

    p = sub.add_parser("hermite", parents=[common], help="moments of A_k^n against the Hermite limit")
    p.add_argument("--basis-size", type=int, default=3)
    p.add_argument("--index", type=_int_list, default=[2, 3], help="1-based basis indices, e.g. 2,3")
    p.add_argument("--grid", type=_int_list, default=[16, 32, 64, 128, 256])
    p.add_argument("--exact-gram", action="store_true", help="use the identity Gram of the orthonormal basis")

    p = sub.add_parser("sample", parents=[common], help="tabulate an expression on the grid")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--expr")
    p.add_argument("--arity", type=int, default=None)
    p.add_argument("--csv-in", help="read a grid CSV instead of an expression")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    p.add_argument("--only", type=_int_list, default=None, help="comma-separated criterion numbers")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is None:
        args.workers = default_workers()
    try:
        if args.format == "csv" and args.command not in ("converge", "hermite", "sample"):
            raise UsageError(f"{args.command} has no CSV form")
        if args.command == "verify" and args.only and any(c not in range(1, 11) for c in args.only):
            raise UsageError("--only takes criterion numbers 1..10")
        result = COMMANDS[args.command](args)
        if isinstance(result, tuple):
            text = _csv_text(*result)
        elif isinstance(result, str):
            text = result
        else:
            text = _json_text(result)
        _emit(args, text)
    except (ExprSyntaxError, UsageError, ValueError) as exc:
        print(f"wicklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapacityError as exc:
        print(f"wicklab: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"wicklab: i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    except WicklabError as exc:
        print(f"wicklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "verify" and not result["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
