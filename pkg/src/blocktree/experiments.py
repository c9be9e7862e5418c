"""Exhaustive and Monte-Carlo experiments on random block matrices.

Every Monte-Carlo run is split into fixed-size chunks of trials; chunk ``c``
draws from ``make_rng(seed, stream, c)``. Counts are summed, so estimates
are bit-identical for any number of worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import partial
from math import comb
from typing import Callable, Sequence

import numpy as np
from sympy import nextprime

from ._util import fan_out, fraction_str, make_rng
from .blocks import (
    INDEXINGS,
    bcn_strong_verify,
    full_rank_failures,
    pascal_odd_columns,
    random_block_payload,
    verify_totally_full_rank,
)
from .linalg import PrimeField, det_batch_small, det_int, rank_batch
from .patterns import (
    BlockShape,
    Pattern,
    all_star,
    count_admissible_selections,
    enumerate_admissible_selections,
    is_admissible,
    is_irreducible,
    is_lb,
    make_triangular,
    minimal_irreducible,
)

TRIAL_CHUNK = 10_000
EXACT_LIMIT = 10**7
SIGMAS = 3


@dataclass
class TrialStats:
    """Counts of an event among (conditioned) samples.

    ``trials`` is the number of samples meeting the condition, so
    ``estimate == successes / trials``; ``drawn`` counts all samples.
    ``comparison`` says how ``estimate`` is judged against ``analytic``:
    ``equal``, ``below`` (an upper bound), ``above`` (a lower bound) or
    ``descriptive`` (no verdict).
    """

    experiment: str
    params: dict
    trials: int
    successes: int
    drawn: int
    mode: str
    seed: int | None = None
    analytic: Fraction | None = None
    comparison: str = "descriptive"

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials <= self.drawn:
            raise ValueError("need 0 <= successes <= trials <= drawn")

    @property
    def estimate(self) -> Fraction:
        if self.trials == 0:
            raise ZeroDivisionError("no sample met the condition")
        return Fraction(self.successes, self.trials)

    @property
    def std_error(self) -> float:
        if self.mode == "exhaustive":
            return 0.0
        p = self.successes / self.trials
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def verdict(self) -> str:
        if self.comparison == "descriptive" or self.analytic is None:
            return "descriptive"
        est, ref = self.estimate, self.analytic
        if self.mode == "exhaustive":
            ok = {"equal": est == ref, "below": est < ref, "above": est > ref}[self.comparison]
        else:
            radius = SIGMAS * self.std_error
            x, r = float(est), float(ref)
            ok = {"equal": abs(x - r) <= radius, "below": x <= r + radius,
                  "above": x >= r - radius}[self.comparison]
        return "pass" if ok else "fail"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "seed": self.seed,
            "mode": self.mode,
            "trials": self.trials,
            "drawn": self.drawn,
            "successes": self.successes,
            "estimate": fraction_str(self.estimate) if self.trials else None,
            "estimate_value": float(self.estimate) if self.trials else None,
            "analytic": fraction_str(self.analytic) if self.analytic is not None else None,
            "analytic_value": float(self.analytic) if self.analytic is not None else None,
            "comparison": self.comparison,
            "sigma": self.std_error if self.trials else None,
            "verdict": self.verdict,
        }


# --- sampling engines ----------------------------------------------------------


def _mc_part(kernel: Callable, trials: int, key: tuple[int, ...], part: int, parts: int) -> tuple[int, int, int]:
    drawn = cond = hits = 0
    n_chunks = -(-trials // TRIAL_CHUNK)
    for c in range(part, n_chunks, parts):
        size = min(TRIAL_CHUNK, trials - c * TRIAL_CHUNK)
        d, k, h = kernel(make_rng(*key, c), size)
        drawn, cond, hits = drawn + d, cond + k, hits + h
    return drawn, cond, hits


def monte_carlo(kernel: Callable, trials: int, key: tuple[int, ...], jobs: int = 1) -> tuple[int, int, int]:
    """Run ``kernel(rng, size) -> (drawn, conditioned, hits)`` over chunks."""
    parts = max(1, min(jobs, -(-trials // TRIAL_CHUNK)))
    results = fan_out(_mc_part, [(kernel, trials, key, w, parts) for w in range(parts)], jobs)
    return tuple(sum(r[i] for r in results) for i in range(3))


def _digits(q: int, width: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    powers = q ** np.arange(width - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def enumerate_all(kernel_on: Callable, q: int, width: int, chunk: int = 1 << 16) -> tuple[int, int, int]:
    """Apply ``kernel_on(values) -> (conditioned, hits)`` to every vector in [0, q)^width."""
    total = q**width
    if total > EXACT_LIMIT:
        raise ValueError(f"{total} cases exceed the exhaustive limit {EXACT_LIMIT}")
    cond = hits = 0
    for start in range(0, total, chunk):
        k, h = kernel_on(_digits(q, width, start, min(total, start + chunk)))
        cond, hits = cond + k, hits + h
    return total, cond, hits


def _fill(mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros((values.shape[0],) + mask.shape, dtype=np.int64)
    out[:, mask] = values
    return out


def _as_kernel(kernel_on: Callable, sampler: Callable) -> Callable:
    return partial(_sampled_kernel, kernel_on, sampler)


def _sampled_kernel(kernel_on, sampler, rng, size):
    k, h = kernel_on(sampler(rng, size))
    return size, k, h


def _uniform_sampler(low: int, high: int, width: int, rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.integers(low, high, size=(size, width), dtype=np.int64)


def _run(kernel_on: Callable, low: int, high: int, width: int, mode: str, trials: int,
         key: tuple[int, ...], jobs: int) -> tuple[int, int, int]:
    if mode == "exhaustive":
        if low != 0:
            return enumerate_all(lambda v: kernel_on(v + low), high - low, width)
        return enumerate_all(kernel_on, high, width)
    if mode == "trials":
        if trials < 1:
            raise ValueError("trials must be positive")
        return monte_carlo(_as_kernel(kernel_on, partial(_uniform_sampler, low, high, width)), trials, key, jobs)
    raise ValueError(f"mode must be 'exhaustive' or 'trials', got {mode!r}")


# --- conditional full-rank probabilities ------------------------------------------


def _block_mask(base: Pattern, shape: BlockShape) -> np.ndarray:
    cells = np.array(base.cells, dtype=bool)
    return np.repeat(np.repeat(cells, shape.a, axis=0), shape.b, axis=1)


def _conditional_rank_kernel(mask: np.ndarray, shape: BlockShape, q: int, values: np.ndarray) -> tuple[int, int]:
    """Among matrices whose trailing block minor has full rank, count the rank-deficient ones."""
    mats = _fill(mask, values)
    a, b = shape.a, shape.b
    k = mask.shape[1] // b
    if k > 1:
        sub = rank_batch(mats[:, a:, b:], q)
        cond = sub == b * (k - 1)
    else:
        cond = np.ones(len(mats), dtype=bool)
    deficient = rank_batch(mats[cond], q) < b * k
    return int(cond.sum()), int(deficient.sum())


def _admissible_base(k: int | None, pattern: Pattern | None) -> Pattern:
    base = pattern if pattern is not None else all_star(k)
    if not (is_lb(base) and is_admissible(base)):
        raise ValueError("base pattern must be an admissible lb-pattern")
    if k is not None and base.rows != k:
        raise ValueError(f"pattern is {base.rows}x{base.rows}, expected k={k}")
    return base


def claim1_check(q: int, k: int | None = None, pattern: Pattern | None = None, mode: str = "exhaustive",
                 trials: int = 10**6, seed: int = 0, jobs: int = 1) -> TrialStats:
    """P[M not full rank | trailing minor full rank] for (2,1)-block patterns.

    ``pattern`` is a k x k admissible lb-pattern (default all-star); each star
    becomes a 2 x 1 block. The minor drops the first two rows and first
    column. The analytic value is q^(-k-1).
    """
    field = PrimeField(q)
    base = _admissible_base(k, pattern)
    k = base.rows
    if k < 2:
        raise ValueError("the pattern must be larger than the elementary 2x1 pattern")
    shape = BlockShape(2, 1)
    mask = _block_mask(base, shape)
    kern = partial(_conditional_rank_kernel, mask, shape, field.q)
    drawn, cond, hits = _run(kern, 0, q, int(mask.sum()), mode, trials, (seed, 1), jobs)
    mode_name = "exhaustive" if mode == "exhaustive" else "monte-carlo"
    return TrialStats("claim1", {"q": q, "k": k, "pattern": str(base)}, cond, hits, drawn, mode_name,
                      seed if mode_name != "exhaustive" else None, Fraction(1, q ** (k + 1)), "equal")


@dataclass
class Prop2Bound:
    """Union bound on the chance that a random (2,1)-block triangular matrix fails."""

    n: int
    q: int
    bound: Fraction
    majorant: Fraction
    refined: Fraction
    q_at_least_2n2: bool

    @property
    def below_one(self) -> bool:
        return self.bound < 1

    def to_dict(self) -> dict:
        return {
            "experiment": "prop2",
            "params": {"n": self.n, "q": self.q},
            "bound": fraction_str(self.bound),
            "bound_value": float(self.bound),
            "majorant": fraction_str(self.majorant),
            "majorant_value": float(self.majorant),
            "refined": fraction_str(self.refined),
            "refined_value": float(self.refined),
            "q_at_least_2n2": self.q_at_least_2n2,
            "below_one": self.below_one,
            "verdict": "pass" if (self.below_one or not self.q_at_least_2n2) else "fail",
        }


def prop2_bound(n: int, q: int) -> Prop2Bound:
    """Sum over k of C(n,k)^2 q^(-k-1), with its geometric majorant sum (n^2/q)^k.

    ``refined`` replaces C(n,k)^2 by the exact number of admissible k x k
    selections of ``T_n``.
    """
    if n < 1 or q < 2:
        raise ValueError("need n >= 1 and q >= 2")
    bound = sum(Fraction(comb(n, k) ** 2, q ** (k + 1)) for k in range(1, n + 1))
    majorant = sum(Fraction(n * n, q) ** k for k in range(1, n + 1))
    refined = sum(Fraction(count_admissible_selections(n, k), q ** (k + 1)) for k in range(1, n + 1))
    big = q >= 2 * n * n
    result = Prop2Bound(n, q, bound, majorant, refined, big)
    if big and not (bound <= majorant < 1):
        raise ArithmeticError(f"union bound chain fails at n={n}, q={q}")
    return result


def smallest_prime_at_least(x: int) -> int:
    return int(nextprime(x - 1))


def prop2_table(n_max: int) -> list[Prop2Bound]:
    return [prop2_bound(n, smallest_prime_at_least(2 * n * n)) for n in range(1, n_max + 1)]


def _fullrank_trial_kernel(n: int, q: int, seed: int, start: int, stop: int) -> tuple[int, int]:
    mask = np.array(make_triangular(n).cells, dtype=bool)
    shape = BlockShape(2, 1)
    payloads = np.stack([random_block_payload(mask, shape, q, (seed, t)) for t in range(start, stop)])
    return stop - start, int(full_rank_failures(payloads, shape, q).sum())


def _fullrank_part(n, q, seed, trials, part, parts):
    drawn = fails = 0
    for c in range(part, -(-trials // TRIAL_CHUNK), parts):
        d, f = _fullrank_trial_kernel(n, q, seed, c * TRIAL_CHUNK, min(trials, (c + 1) * TRIAL_CHUNK))
        drawn, fails = drawn + d, fails + f
    return drawn, fails


def _fullrank_exhaustive_kernel(n: int, q: int, values: np.ndarray) -> tuple[int, int]:
    shape = BlockShape(2, 1)
    mask = _block_mask(make_triangular(n), shape)
    return len(values), int(full_rank_failures(_fill(mask, values), shape, q).sum())


def monte_carlo_full_rank(n: int, q: int, trials: int = 500, seed: int = 0, jobs: int = 1,
                          mode: str = "trials") -> TrialStats:
    """Failure rate of random T_n-consistent (2,1)-block matrices, checked exhaustively.

    Trial ``t`` uses the same matrix as ``random_consistent(T_n, 2x1, GF(q), (seed, t))``.
    """
    PrimeField(q)
    if mode == "exhaustive":
        width = n * (n + 1)
        drawn, _, fails = enumerate_all(partial(_fullrank_exhaustive_kernel, n, q), q, width)
        return TrialStats("mc-fullrank", {"n": n, "q": q}, drawn, fails, drawn, "exhaustive", None,
                          prop2_bound(n, q).bound, "descriptive")
    parts = max(1, min(jobs, -(-trials // TRIAL_CHUNK)))
    results = fan_out(_fullrank_part, [(n, q, seed, trials, w, parts) for w in range(parts)], jobs)
    drawn = sum(r[0] for r in results)
    fails = sum(r[1] for r in results)
    return TrialStats("mc-fullrank", {"n": n, "q": q}, drawn, fails, drawn, "monte-carlo", seed,
                      prop2_bound(n, q).bound, "below")


def st_probability_check(t: int, k: int, q: int, trials: int = 10**6, seed: int = 0, jobs: int = 1,
                         mode: str = "trials", pattern: Pattern | None = None
                         ) -> tuple[TrialStats, TrialStats | None]:
    """Rank-deficiency probabilities for (t+1, t) blocks.

    First: a uniform (t+1) x t matrix is rank deficient, bound 1/q.
    Second (k > 1): a (t+1)k x tk matrix on a k x k block pattern is rank
    deficient given its minor without the first block row and block column
    has full rank, bound q^(-k).
    """
    if t < 1 or k < 1:
        raise ValueError("need t >= 1 and k >= 1")
    PrimeField(q)
    shape = BlockShape(t + 1, t)
    single_mask = np.ones((t + 1, t), dtype=bool)
    first_kern = partial(_conditional_rank_kernel, single_mask, shape, q)
    d, c, h = _run(first_kern, 0, q, single_mask.size, mode, trials, (seed, 2), jobs)
    mode_name = "exhaustive" if mode == "exhaustive" else "monte-carlo"
    seed_out = seed if mode_name != "exhaustive" else None
    first = TrialStats("st-single", {"t": t, "q": q}, c, h, d, mode_name, seed_out, Fraction(1, q), "below")
    if k == 1:
        return first, None
    base = _admissible_base(k, pattern)
    mask = _block_mask(base, shape)
    kern = partial(_conditional_rank_kernel, mask, shape, q)
    d, c, h = _run(kern, 0, q, int(mask.sum()), mode, trials, (seed, 3), jobs)
    second = TrialStats("st-conditional", {"t": t, "k": k, "q": q, "pattern": str(base)}, c, h, d,
                        mode_name, seed_out, Fraction(1, q**k), "below")
    return first, second


# --- Pascal prime search ----------------------------------------------------------


@dataclass
class PascalPrimeRow:
    n: int
    prime: int | None
    primes_tried: int

    def to_dict(self) -> dict:
        return {"n": self.n, "prime": self.prime, "primes_tried": self.primes_tried}


def pascal_prime_search(n: int, indexing: str = "odd-0-based", check: str = "full-rank",
                        max_prime: int = 10**5, primes: Sequence[int] | None = None) -> list[PascalPrimeRow]:
    """Least prime making the odd-column Pascal block matrix pass ``check``, for sizes 1..n."""
    if indexing not in INDEXINGS:
        raise ValueError(f"indexing must be one of {INDEXINGS}")
    if check not in ("full-rank", "bcn-strong"):
        raise ValueError("check must be 'full-rank' or 'bcn-strong'")
    rows = []
    for size in range(1, n + 1):
        tried = 0
        found = None
        candidates = primes if primes is not None else _primes_up_to(max_prime)
        for p in candidates:
            tried += 1
            M = pascal_odd_columns(size, PrimeField(p), indexing)
            ok = verify_totally_full_rank(M).verified if check == "full-rank" else bcn_strong_verify(M).verified
            if ok:
                found = int(p)
                break
        rows.append(PascalPrimeRow(size, found, tried))
    return rows


def _primes_up_to(limit: int):
    p = 2
    while p <= limit:
        yield p
        p = int(nextprime(p))


# --- integer matrices ------------------------------------------------------------------


@dataclass
class IntConjectureConfig:
    n: int
    m: int
    pattern: Pattern | None = None
    trials: int = 10**5

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        if self.pattern is None:
            self.pattern = minimal_irreducible(self.n)
        if self.pattern.rows != self.n or not is_lb(self.pattern) or not is_irreducible(self.pattern):
            raise ValueError("pattern must be an n x n irreducible lb-pattern")


def _dets(mats: np.ndarray) -> np.ndarray:
    out = det_batch_small(mats)
    if out is None:
        return np.array([det_int(m) for m in mats.astype(object)], dtype=object)
    return out


def _int_conjecture_kernel(mask: np.ndarray, values: np.ndarray) -> tuple[int, int]:
    mats = _fill(mask, values)
    n = mask.shape[0]
    cond = _dets(mats[:, : n - 1, 1:]) != 0
    singular = _dets(mats[cond]) == 0
    return int(cond.sum()), int(singular.sum())


def int_conjecture_mc(cfg: IntConjectureConfig, seed: int = 0, jobs: int = 1, mode: str = "trials",
                      stream: int = 0) -> TrialStats:
    """P[M singular | M[1..n-1 | 2..n] nonsingular] for entries uniform on [-m, m].

    Conditioning is by rejection: drawn samples failing the condition are
    discarded, and ``trials`` counts the kept ones.
    """
    mask = np.array(cfg.pattern.cells, dtype=bool)
    kern = partial(_int_conjecture_kernel, mask)
    d, c, h = _run(kern, -cfg.m, cfg.m + 1, int(mask.sum()), mode, cfg.trials, (seed, 4, stream), jobs)
    if c == 0:
        raise RuntimeError("no sample met the conditioning event")
    mode_name = "exhaustive" if mode == "exhaustive" else "monte-carlo"
    return TrialStats("int-conjecture", {"n": cfg.n, "m": cfg.m, "pattern": str(cfg.pattern)}, c, h, d,
                      mode_name, seed if mode_name != "exhaustive" else None)


def _kl_kernel(n: int, values: np.ndarray) -> tuple[int, int]:
    mask = np.array(make_triangular(n).cells, dtype=bool)
    mats = _fill(mask, values)
    ok = np.ones(len(mats), dtype=bool)
    for sel in enumerate_admissible_selections(n, irreducible=True):
        r = np.array(sel.rows) - 1
        c = np.array(sel.cols) - 1
        ok &= _dets(mats[:, r[:, None], c[None, :]]) != 0
    return len(mats), int(ok.sum())


def kl_experiment(n: int, m: int, trials: int = 10**4, seed: int = 0, jobs: int = 1, mode: str = "trials",
                  stream: int = 0) -> TrialStats:
    """Rate at which random triangular integer matrices on [-m, m] are totally nonsingular."""
    kern = partial(_kl_kernel, n)
    d, c, h = _run(kern, -m, m + 1, n * (n + 1) // 2, mode, trials, (seed, 5, stream), jobs)
    mode_name = "exhaustive" if mode == "exhaustive" else "monte-carlo"
    return TrialStats("kl", {"n": n, "m": m}, c, h, d, mode_name, seed if mode_name != "exhaustive" else None)


@dataclass
class SweepReport:
    """An m-sweep with a 3-sigma monotonicity check and a descriptive fit."""

    experiment: str
    direction: str
    points: list[TrialStats]
    seed: int
    epsilon_fit: float | None = None
    violations: list[tuple[int, int]] = dc_field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "direction": self.direction,
            "monotone_within_3sigma": self.monotone,
            "violations": [list(v) for v in self.violations],
            "epsilon_fit": self.epsilon_fit,
            "epsilon_fit_note": "descriptive least-squares fit of log(estimate) against log(m); not a verdict",
            "points": [p.to_dict() for p in self.points],
            "verdict": "pass" if self.monotone else "fail",
        }


def _monotone_violations(points: list[TrialStats], direction: str) -> list[tuple[int, int]]:
    bad = []
    for i in range(len(points) - 1):
        a, b = points[i], points[i + 1]
        radius = SIGMAS * math.hypot(a.std_error, b.std_error)
        diff = float(b.estimate - a.estimate)
        if (direction == "nonincreasing" and diff > radius) or (direction == "nondecreasing" and -diff > radius):
            bad.append((a.params["m"], b.params["m"]))
    return bad


def fit_epsilon(points: list[TrialStats], n: int) -> float | None:
    """Least-squares slope of log(estimate) on log(m), divided by -n."""
    xs = [math.log(p.params["m"]) for p in points if p.successes > 0]
    ys = [math.log(float(p.estimate)) for p in points if p.successes > 0]
    if len(xs) < 2:
        return None
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope / n)


def int_conjecture_sweep(n: int, ms: Sequence[int], trials: int = 10**5, seed: int = 0, jobs: int = 1,
                         pattern: Pattern | None = None) -> SweepReport:
    points = [int_conjecture_mc(IntConjectureConfig(n, m, pattern, trials), seed, jobs, stream=i)
              for i, m in enumerate(ms)]
    return SweepReport("int-conjecture-sweep", "nonincreasing", points, seed, fit_epsilon(points, n),
                       _monotone_violations(points, "nonincreasing"))


def kl_sweep(n: int, ms: Sequence[int], trials: int = 10**4, seed: int = 0, jobs: int = 1) -> SweepReport:
    points = [kl_experiment(n, m, trials, seed, jobs, stream=i) for i, m in enumerate(ms)]
    return SweepReport("kl-sweep", "nondecreasing", points, seed, None, _monotone_violations(points, "nondecreasing"))
