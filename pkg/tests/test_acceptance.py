"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

import io
import json
import random
import time
from contextlib import redirect_stdout
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from blocktree.blocks import (
    BlockMatrix,
    admissible_minors,
    pascal_triangular,
    random_consistent,
    random_int_consistent,
    verify_int_totally_nonsingular,
    verify_totally_full_rank,
)
from blocktree.cli import run
from blocktree.codes import encode, interleave_identity, min_distance_exhaustive, normal_form, singleton_witness
from blocktree.experiments import (
    IntConjectureConfig,
    claim1_check,
    int_conjecture_mc,
    int_conjecture_sweep,
    kl_sweep,
    monte_carlo_full_rank,
    prop2_bound,
    prop2_table,
    st_probability_check,
)
from blocktree.linalg import PrimeField, det_int, extract, parse_matrix
from blocktree.patterns import (
    BlockShape,
    IndexSelection,
    Pattern,
    decompose_irreducible,
    fact2_split,
    is_admissible,
    make_triangular,
    selection_is_admissible,
    subpattern,
)

pytestmark = pytest.mark.acceptance

S21 = BlockShape(2, 1)


def cli_json(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(list(argv))
    return code, buf.getvalue()


def criterion_1():
    notes = []
    ok = True
    for q, k in [(2, 2), (3, 2), (2, 3)]:
        r = claim1_check(q, k, mode="exhaustive")
        ok &= r.mode == "exhaustive" and r.estimate == Fraction(1, q ** (k + 1))
        notes.append(f"({q},{k})={r.estimate}")
    for q, pat in [(2, "*00/**0/***"), (3, "*0/**")]:
        p = Pattern.from_string(pat)
        r = claim1_check(q, pattern=p, mode="exhaustive")
        ok &= r.estimate == Fraction(1, q ** (p.rows + 1))
        notes.append(f"{pat}@{q}={r.estimate}")
    return ok, ", ".join(notes), 10


def criterion_2():
    table = prop2_table(20)
    ok = all(row.bound < 1 for row in table)
    mc = monte_carlo_full_rank(5, 53, trials=500, seed=0)
    bound = prop2_bound(5, 53).bound
    ok &= mc.drawn == 500 and float(mc.estimate) <= float(bound) + 3 * mc.std_error
    worst = max(float(r.bound) for r in table)
    return ok, f"max bound n<=20 {worst:.4f}; mc rate {mc.estimate} vs {float(bound):.6f}", 120


def criterion_3(tmp_path):
    ok = True
    notes = []
    for n, q in [(4, 7), (3, 5)]:
        distances = []
        payloads = set()
        for seed in range(5):
            path = tmp_path / f"g{n}_{q}_{seed}.txt"
            code, out = cli_json("gen", "--n", str(n), "--q", str(q), "--until-verified", "--seed", str(seed),
                                 "--save", str(path))
            ok &= code == 0 and json.loads(out)["result"]["verification"]["verified"]
            field, mat = parse_matrix(path.read_text())
            payloads.add(tuple(map(int, mat.reshape(-1))))
            rep = min_distance_exhaustive(interleave_identity(BlockMatrix(mat, S21, field)))
            ok &= rep.representatives_enumerated == (q**n - 1) // (q - 1)
            ok &= rep.min_relative_distance > Fraction(1, 2)
            distances.append(str(rep.min_relative_distance))
        ok &= len(payloads) == 5
        notes.append(f"n={n} q={q}: {','.join(distances)}")
    # negative control: block (2,1) zeroed
    bad = BlockMatrix(np.array([[1, 0], [0, 0], [0, 0], [0, 1]]), S21, PrimeField(3))
    ok &= not verify_totally_full_rank(bad).verified
    control = min_distance_exhaustive(interleave_identity(bad)).min_relative_distance
    notes.append(f"control distance {control}")
    return ok, "; ".join(notes), 60


def criterion_4():
    ok = True
    notes = []
    for n, k, bound in [(10, 7, Fraction(7, 10)), (12, 8, Fraction(8, 11))]:
        code = normal_form(random_consistent(make_triangular(n), S21, PrimeField(101), seed=0))
        w = singleton_witness(code, k)
        word = np.array(w.codeword)
        ok &= w.l == 3 and not word[k:k + 3].any() and word[:k].any() and w.weight <= bound
        ok &= (encode(code, w.message) == word).all()
        if n == 10:
            ok &= not word[-3:].any() and w.closed_form_bound == Fraction(7, 10)
        notes.append(f"k={k} l={w.l} weight={w.weight}")
    return ok, ", ".join(notes), 5


def criterion_5():
    ok = True
    for n in range(1, 9):
        P = pascal_triangular(n).payload
        ok &= verify_int_totally_nonsingular(P).verified
        ok &= all(d > 0 for _, d in admissible_minors(P))
    rep = verify_totally_full_rank(pascal_triangular(3, PrimeField(2)))
    ok &= not rep.verified and rep.failure.selection == IndexSelection((3,), (2,))
    return ok, f"mod-2 witness {rep.failure.selection} rank {rep.failure.rank}", 60


def _random_lb(n, rng):
    lengths = sorted(rng.randint(0, n) for _ in range(n))
    return Pattern(tuple(tuple(j < lengths[i] for j in range(n)) for i in range(n)))


def criterion_6():
    failures = 0
    # Fact 1, every selection for n <= 6
    for n in range(1, 7):
        T = make_triangular(n)
        for k in range(1, n + 1):
            for rows in combinations(range(1, n + 1), k):
                for cols in combinations(range(1, n + 1), k):
                    sel = IndexSelection(rows, cols)
                    failures += selection_is_admissible(n, sel) != is_admissible(subpattern(T, sel))
    # Fact 2 certificates
    rng = random.Random(0)
    done = 0
    while done < 1000:
        p = _random_lb(rng.randint(1, 8), rng)
        if not p.cells[0][0]:
            continue
        done += 1
        s = fact2_split(p)
        if s.admissible:
            failures += not is_admissible(p)
            continue
        m = s.m
        failures += not is_admissible(subpattern(p, IndexSelection.principal(range(1, m + 1))))
        failures += any(p.star(a, b) for a in range(1, m + 2) for b in range(m + 1, p.rows + 1))
    # Fact 3 on integer matrices
    for trial in range(500):
        n = rng.randint(1, 5)
        lengths = [rng.randint(i + 1, n) for i in range(n)]
        for i in range(1, n):
            lengths[i] = max(lengths[i], lengths[i - 1])
        pat = Pattern(tuple(tuple(j < lengths[i] for j in range(n)) for i in range(n)))
        A = random_int_consistent(pat, rng.choice([1, 9]), seed=(3, trial))
        whole = det_int(A) != 0
        parts = all(det_int(extract(A, sel)) != 0 for sel in decompose_irreducible(pat))
        failures += whole != parts
    # encoder properties on 10^4 messages
    nprng = np.random.default_rng(0)
    codes = [interleave_identity(random_consistent(make_triangular(4), S21, PrimeField(7), seed=1)),
             normal_form(random_consistent(make_triangular(3), BlockShape(2, 2), PrimeField(5), seed=2))]
    for i in range(10_000):
        code = codes[i % 2]
        q, N = code.field.q, code.n * code.t
        x, y = nprng.integers(0, q, N), nprng.integers(0, q, N)
        c, cut = int(nprng.integers(0, q)), int(nprng.integers(0, code.n + 1))
        ex, ey = encode(code, x), encode(code, y)
        failures += not (encode(code, (c * x + y) % q) == (c * ex + ey) % q).all()
        z = x.copy()
        z[cut * code.t:] = y[cut * code.t:]
        failures += not (encode(code, z)[:cut] == ex[:cut]).all()
        w = x.copy()
        w[:cut * code.t] = 0
        ew = encode(code, w)
        failures += bool(ew[:cut].any())
        nz = np.nonzero(w.reshape(code.n, code.t).any(axis=1))[0]
        if nz.size:
            failures += not ew[nz[0]].any()
    return failures == 0, f"{failures} failures", None


def criterion_7():
    single, _ = st_probability_check(2, 1, 3, mode="exhaustive")
    ok = single.estimate < Fraction(1, 3)
    _, cond = st_probability_check(1, 2, 5, trials=10**6, seed=0)
    ok &= cond.drawn == 10**6 and float(cond.estimate) <= 5**-2 + 3 * cond.std_error
    return ok, f"exhaustive {single.estimate}; conditional {float(cond.estimate):.5f} (n={cond.trials})", 120


def criterion_8():
    exact = int_conjecture_mc(IntConjectureConfig(2, 10), mode="exhaustive")
    ok = exact.mode == "exhaustive" and exact.drawn == 21**4 and exact.estimate == Fraction(761, 46305)
    sweep = int_conjecture_sweep(4, [10, 100, 1000], trials=10**5, seed=0)
    kl = kl_sweep(3, [5, 50, 500], trials=10**4, seed=0)
    ok &= sweep.monotone and kl.monotone
    doc = sweep.to_dict()
    ok &= "descriptive" in doc["epsilon_fit_note"]
    est = ", ".join(f"{pt['estimate_value']:.2e}" for pt in doc["points"])
    fit = doc["epsilon_fit"]
    return ok, f"exact {exact.estimate}; sweep [{est}] eps_hat={fit if fit is None else round(fit, 3)}", None


def criterion_9(tmp_path):
    mat = tmp_path / "m.txt"
    cli_json("gen", "--n", "5", "--q", "53", "--seed", "1", "--save", str(mat))
    commands = [
        ["gen", "--n", "4", "--q", "7", "--until-verified", "--seed", "3"],
        ["verify", "--in", str(mat)],
        ["exp", "mc-fullrank", "--n", "4", "--q", "11", "--trials", "30000", "--seed", "5"],
        ["exp", "claim1", "--q", "3", "--k", "2", "--trials", "40000", "--seed", "2"],
        ["exp", "st", "--t", "1", "--k", "2", "--q", "5", "--trials", "30000"],
        ["exp", "int-conjecture", "--n", "3", "--m", "5", "50", "--trials", "20000"],
        ["exp", "kl", "--n", "3", "--m", "5", "50", "--trials", "20000"],
    ]
    ok = True
    for argv in commands:
        outs = {cli_json(*argv, "--jobs", str(j)) for j in (1, 2, 3)}
        ok &= len(outs) == 1
        # every report records the seed it ran with
        first = json.loads(next(iter(outs))[1])
        ok &= first["config"]["seed"] is not None
    return ok, f"{len(commands)} commands byte-identical across --jobs 1/2/3", None


CRITERIA = {
    1: ("Claim 1 exactness", criterion_1),
    2: ("union bound and full-rank Monte-Carlo", criterion_2),
    3: ("distance above 1/2 for verified matrices", criterion_3),
    4: ("Singleton witness", criterion_4),
    5: ("Pascal properties", criterion_5),
    6: ("fact suite", criterion_6),
    7: ("(t+1,t) probabilities", criterion_7),
    8: ("integer matrix experiments", criterion_8),
    9: ("reproducibility across --jobs", criterion_9),
}


def evaluate(number, tmp_path):
    name, fn = CRITERIA[number]
    start = time.perf_counter()
    args = (tmp_path,) if fn.__code__.co_argcount else ()
    ok, detail, limit = fn(*args)
    elapsed = time.perf_counter() - start
    if limit is not None and elapsed >= limit:
        ok = False
        detail += f" (runtime {elapsed:.1f}s over {limit}s)"
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} {name}: {detail} [{elapsed:.1f}s]"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, tmp_path, capsys):
    ok, line = evaluate(number, tmp_path)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    import pathlib
    import sys
    import tempfile

    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for number in sorted(CRITERIA):
            sub = pathlib.Path(tmp) / str(number)
            sub.mkdir()
            ok, line = evaluate(number, sub)
            print(line, flush=True)
            results.append(ok)
    sys.exit(0 if all(results) else 1)
