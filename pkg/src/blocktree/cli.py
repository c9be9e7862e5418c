"""Command-line entry point: ``blocktree <command> ...``.

Every command prints one JSON document (or CSV rows for sweeps) holding the
resolved configuration and the result. Exit status is 0 on success, 1 when
a checked property turns out false, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys
from fractions import Fraction

from . import __version__
from ._util import JOBS_ENV, default_jobs
from .blocks import (
    INDEXINGS,
    BlockMatrix,
    bcn_strong_verify,
    pascal_odd_columns,
    pascal_triangular,
    random_consistent,
    verify_int_totally_nonsingular,
    verify_totally_full_rank,
)
from .codes import TreeCode, encode, interleave_identity, min_distance_exhaustive, normal_form, singleton_witness
from .experiments import (
    IntConjectureConfig,
    claim1_check,
    int_conjecture_mc,
    int_conjecture_sweep,
    kl_experiment,
    kl_sweep,
    monte_carlo_full_rank,
    pascal_prime_search,
    prop2_bound,
    prop2_table,
    smallest_prime_at_least,
    st_probability_check,
)
from .linalg import PrimeField, format_matrix, read_matrix
from .patterns import BlockShape, Pattern, make_triangular

EXIT_OK, EXIT_PROPERTY_FALSE, EXIT_USAGE = 0, 1, 2
NOT_CONFIG = {"handler", "jobs", "out"}


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    if text == "random":
        return secrets.randbits(32)
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer or 'random'")
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def _prime(text: str) -> int:
    try:
        return PrimeField(int(text)).q
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _shape(text: str) -> BlockShape:
    try:
        return BlockShape.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _matrix_rows(mat) -> list[list[int]]:
    return [[int(x) for x in row] for row in mat]


def _load_block_matrix(path: str, shape: BlockShape) -> BlockMatrix:
    field, mat = read_matrix(path)
    return BlockMatrix(mat, shape, field)


def _load_code(path: str) -> TreeCode:
    with open(path) as fh:
        data = json.load(fh)
    data = data.get("result", data)
    data = data.get("code", data)
    return TreeCode.from_dict(data)


# --- handlers ---------------------------------------------------------------------


def cmd_gen(args):
    field = PrimeField(args.q)
    pattern = make_triangular(args.n)
    attempts = args.max_attempts if args.until_verified else 1
    M = report = None
    for attempt in range(attempts):
        M = random_consistent(pattern, args.shape, field, (args.seed, attempt))
        if not args.until_verified:
            break
        report = verify_totally_full_rank(M, jobs=args.jobs)
        if report.verified:
            break
    assert M is not None
    if args.save:
        with open(args.save, "w") as fh:
            fh.write(M.to_text())
    result = {
        "matrix": _matrix_rows(M.payload),
        "matrix_text": M.to_text(),
        "attempts": attempt + 1,
        "verification": report.to_dict() if report else None,
    }
    status = EXIT_PROPERTY_FALSE if report is not None and not report.verified else EXIT_OK
    return result, status


def cmd_verify(args):
    field, mat = read_matrix(args.input)
    if field is None:
        if args.shape != BlockShape(1, 1):
            raise UsageError("integer matrices are verified with --shape 1x1")
        report = verify_int_totally_nonsingular(mat, selections=args.selections)
    else:
        M = BlockMatrix(mat, args.shape, field)
        if args.check == "bcn-strong":
            report = bcn_strong_verify(M)
        else:
            report = verify_totally_full_rank(M, args.mode, trials=args.trials, seed=args.seed, jobs=args.jobs)
    return report.to_dict(), EXIT_OK if report.verified else EXIT_PROPERTY_FALSE


def cmd_pascal(args):
    field = PrimeField(args.q) if args.q else None
    if args.odd_columns:
        M = pascal_odd_columns(args.n, field, args.indexing)
    else:
        M = pascal_triangular(args.n, field)
    if args.save:
        with open(args.save, "w") as fh:
            fh.write(M.to_text())
    result = {"matrix": _matrix_rows(M.payload), "matrix_text": M.to_text(), "shape": str(M.shape),
              "verification": None}
    status = EXIT_OK
    if args.verify:
        if field is None and not args.odd_columns:
            report = verify_int_totally_nonsingular(M)
        elif field is None:
            raise UsageError("verifying odd columns needs --q")
        else:
            report = verify_totally_full_rank(M, jobs=args.jobs, indexing=args.indexing if args.odd_columns else None)
        result["verification"] = report.to_dict()
        status = EXIT_OK if report.verified else EXIT_PROPERTY_FALSE
    return result, status


def cmd_code_build(args):
    M = _load_block_matrix(args.input, args.shape)
    if args.construction == "interleave":
        code = interleave_identity(M)
    else:
        code = normal_form(M)
    return {"code": code.to_dict(), "rate": f"{code.rate.numerator}/{code.rate.denominator}"}, EXIT_OK


def cmd_code_encode(args):
    code = _load_code(args.input)
    message = [int(x) for x in args.message.replace(" ", "").split(",") if x]
    word = encode(code, message)
    return {"message": message, "codeword": _matrix_rows(word), "codeword_text": format_matrix(word, code.field)}, EXIT_OK


def cmd_code_distance(args):
    code = _load_code(args.input)
    report = min_distance_exhaustive(code, budget=args.budget).to_dict()
    status = EXIT_OK
    if args.require_above is not None:
        threshold = Fraction(args.require_above)
        report["required_above"] = f"{threshold.numerator}/{threshold.denominator}"
        if not Fraction(report["min_relative_distance"]) > threshold:
            status = EXIT_PROPERTY_FALSE
    return report, status


def cmd_code_singleton(args):
    code = _load_code(args.input)
    return singleton_witness(code, args.k).to_dict(), EXIT_OK


def _stats_status(*reports) -> int:
    return EXIT_PROPERTY_FALSE if any(r and r.get("verdict") == "fail" for r in reports) else EXIT_OK


def _pattern(text):
    return Pattern.from_string(text) if text else None


def cmd_exp_claim1(args):
    mode = "exhaustive" if args.exhaustive else "trials"
    r = claim1_check(args.q, args.k, _pattern(args.pattern), mode, args.trials, args.seed, args.jobs).to_dict()
    return r, _stats_status(r)


def cmd_exp_prop2(args):
    if args.n_max:
        rows = [b.to_dict() for b in prop2_table(args.n_max)]
        return {"experiment": "prop2-table", "rows": rows, "verdict": "pass" if all(
            r["below_one"] for r in rows) else "fail"}, _stats_status(*rows)
    if args.n is None:
        raise UsageError("give --n (and optionally --q) or --n-max")
    q = args.q
    if q is None:
        q = smallest_prime_at_least(2 * args.n * args.n)
    r = prop2_bound(args.n, q).to_dict()
    return r, _stats_status(r)


def cmd_exp_mc(args):
    mode = "exhaustive" if args.exhaustive else "trials"
    r = monte_carlo_full_rank(args.n, args.q, args.trials, args.seed, args.jobs, mode).to_dict()
    return r, _stats_status(r)


def cmd_exp_st(args):
    mode = "exhaustive" if args.exhaustive else "trials"
    first, second = st_probability_check(args.t, args.k, args.q, args.trials, args.seed, args.jobs, mode,
                                         _pattern(args.pattern))
    a, b = first.to_dict(), second.to_dict() if second else None
    return {"experiment": "st", "single": a, "conditional": b}, _stats_status(a, b)


def cmd_exp_pascal_prime(args):
    rows = pascal_prime_search(args.n, args.indexing, args.check, args.max_prime)
    return {"experiment": "pascal-prime", "indexing": args.indexing, "check": args.check,
            "rows": [r.to_dict() for r in rows]}, EXIT_OK


def cmd_exp_int(args):
    mode = "exhaustive" if args.exhaustive else "trials"
    pattern = _pattern(args.pattern)
    if len(args.m) == 1 or mode == "exhaustive":
        points = [int_conjecture_mc(IntConjectureConfig(args.n, m, pattern, args.trials), args.seed, args.jobs,
                                    mode, stream=i).to_dict() for i, m in enumerate(args.m)]
        if len(points) == 1:
            return points[0], EXIT_OK
        return {"experiment": "int-conjecture", "points": points}, EXIT_OK
    r = int_conjecture_sweep(args.n, args.m, args.trials, args.seed, args.jobs, pattern).to_dict()
    return r, _stats_status(r)


def cmd_exp_kl(args):
    mode = "exhaustive" if args.exhaustive else "trials"
    if len(args.m) == 1 or mode == "exhaustive":
        points = [kl_experiment(args.n, m, args.trials, args.seed, args.jobs, mode, stream=i).to_dict()
                  for i, m in enumerate(args.m)]
        if len(points) == 1:
            return points[0], EXIT_OK
        return {"experiment": "kl", "points": points}, EXIT_OK
    r = kl_sweep(args.n, args.m, args.trials, args.seed, args.jobs).to_dict()
    return r, _stats_status(r)


# --- parser -------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    if seed:
        p.add_argument("--seed", type=_seed, default=0, help="integer seed or 'random' (default 0)")
    p.add_argument("--jobs", type=_positive, default=default_jobs(),
                   help=f"worker processes (default ${JOBS_ENV} or 1)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blocktree", description="Block-triangular totally full rank matrices and linear tree codes.",
                                     epilog="Exit status: 0 ok, 1 property false, 2 usage or input error.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="random block-triangular matrix over GF(q)")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--q", type=_prime, required=True)
    p.add_argument("--shape", type=_shape, default=BlockShape(2, 1))
    p.add_argument("--until-verified", action="store_true", help="retry until totally full rank")
    p.add_argument("--max-attempts", type=_positive, default=1000)
    p.add_argument("--save", help="also write the matrix in text format")
    _common(p)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("verify", help="verify total full rank (or integer total nonsingularity)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--shape", type=_shape, default=BlockShape(2, 1))
    p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    p.add_argument("--trials", type=_positive, default=1000, help="selections checked in sampled mode")
    p.add_argument("--check", choices=("full-rank", "bcn-strong"), default="full-rank")
    p.add_argument("--selections", choices=("irreducible", "admissible"), default="irreducible",
                   help="minors checked for integer matrices")
    _common(p)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("pascal", help="triangular Pascal matrix or its odd columns")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--q", type=_prime, help="reduce modulo this prime")
    p.add_argument("--odd-columns", action="store_true", help="odd columns of the 2n x 2n matrix as (2,1) blocks")
    p.add_argument("--indexing", choices=INDEXINGS, default="odd-0-based")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--save")
    _common(p, seed=False)
    p.set_defaults(handler=cmd_pascal)

    code = sub.add_parser("code", help="tree codes").add_subparsers(dest="code_command", required=True)
    p = code.add_parser("build", help="generator from a block matrix file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--shape", type=_shape, default=BlockShape(2, 1))
    p.add_argument("--construction", choices=("interleave", "normal"), default="interleave")
    _common(p, seed=False)
    p.set_defaults(handler=cmd_code_build)
    p = code.add_parser("encode")
    p.add_argument("--in", dest="input", required=True, help="code JSON")
    p.add_argument("--message", required=True, help="comma-separated symbols")
    _common(p, seed=False)
    p.set_defaults(handler=cmd_code_encode)
    p = code.add_parser("distance", help="exact minimum relative distance")
    p.add_argument("--in", dest="input", required=True, help="code JSON")
    p.add_argument("--budget", type=_positive, default=10**7)
    p.add_argument("--require-above", help="exit 1 unless the distance exceeds this fraction, e.g. 1/2")
    _common(p, seed=False)
    p.set_defaults(handler=cmd_code_distance)
    p = code.add_parser("singleton-witness", help="low-weight codeword for the Singleton-type bound")
    p.add_argument("--in", dest="input", required=True, help="code JSON in normal form")
    p.add_argument("--k", type=_positive, required=True)
    _common(p, seed=False)
    p.set_defaults(handler=cmd_code_singleton)

    exp = sub.add_parser("exp", help="experiments").add_subparsers(dest="exp_command", required=True)
    p = exp.add_parser("claim1", help="conditional rank-deficiency probability")
    p.add_argument("--q", type=_prime, required=True)
    p.add_argument("--k", type=_positive)
    p.add_argument("--pattern", help="k x k admissible base pattern, e.g. '*0/**'")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--trials", type=_positive, default=10**6)
    _common(p)
    p.set_defaults(handler=cmd_exp_claim1)
    p = exp.add_parser("prop2", help="union bound for random (2,1)-block matrices")
    p.add_argument("--n", type=_positive)
    p.add_argument("--q", type=int, help="field size (default: least prime >= 2n^2)")
    p.add_argument("--n-max", type=_positive, help="table for n = 1..N at the least prime >= 2n^2")
    _common(p, seed=False)
    p.set_defaults(handler=cmd_exp_prop2)
    p = exp.add_parser("mc-fullrank", help="failure rate of random (2,1)-block matrices")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--q", type=_prime, required=True)
    p.add_argument("--trials", type=_positive, default=500)
    p.add_argument("--exhaustive", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_exp_mc)
    p = exp.add_parser("st", help="rank-deficiency probabilities for (t+1,t) blocks")
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--k", type=_positive, default=1)
    p.add_argument("--q", type=_prime, required=True)
    p.add_argument("--pattern")
    p.add_argument("--trials", type=_positive, default=10**6)
    p.add_argument("--exhaustive", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_exp_st)
    p = exp.add_parser("pascal-prime", help="least prime for the odd-column Pascal matrix")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--indexing", choices=INDEXINGS, default="odd-0-based")
    p.add_argument("--check", choices=("full-rank", "bcn-strong"), default="full-rank")
    p.add_argument("--max-prime", type=_positive, default=10**5)
    _common(p, seed=False)
    p.set_defaults(handler=cmd_exp_pascal_prime)
    p = exp.add_parser("int-conjecture", help="conditional singularity of irreducible integer patterns")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--m", type=_positive, nargs="+", required=True, help="entry bound(s); several give a sweep")
    p.add_argument("--pattern", help="irreducible lb-pattern (default minimal irreducible)")
    p.add_argument("--trials", type=_positive, default=10**5)
    p.add_argument("--exhaustive", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_exp_int)
    p = exp.add_parser("kl", help="rate of totally nonsingular random triangular integer matrices")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--m", type=_positive, nargs="+", required=True)
    p.add_argument("--trials", type=_positive, default=10**4)
    p.add_argument("--exhaustive", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_exp_kl)
    return parser


def _config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in NOT_CONFIG:
            continue
        out[key] = str(value) if isinstance(value, BlockShape) else value
    return out


def _csv_rows(result: dict) -> list[dict]:
    if "points" in result:
        rows = []
        for p in result["points"]:
            row = {k: v for k, v in p.items() if k != "params"}
            row.update(p["params"])
            rows.append(row)
        return rows
    if "rows" in result:
        return [{k: v for k, v in r.items() if k != "params"} | r.get("params", {}) for r in result["rows"]]
    flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
    flat.update(result.get("params", {}))
    return [flat]


def render(report: dict, fmt: str) -> str:
    if fmt == "csv":
        rows = _csv_rows(report["result"])
        buf = io.StringIO()
        fields = sorted({k for r in rows for k in r})
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = " ".join(x for x in (args.command, getattr(args, "code_command", None),
                                   getattr(args, "exp_command", None)) if x)
    try:
        result, status = args.handler(args)
    except (UsageError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"blocktree {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"command": command, "config": _config(args), "result": result}
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
