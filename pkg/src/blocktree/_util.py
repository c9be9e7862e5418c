"""Seeded random streams and process-pool fan-out shared across modules."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

JOBS_ENV = "BLOCKTREE_JOBS"


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``key``, e.g. (seed, trial_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def fan_out(fn: Callable, arg_list: Sequence[tuple], jobs: int = 1) -> list:
    """Apply ``fn`` to each argument tuple, in order, optionally in processes."""
    if jobs <= 1 or len(arg_list) <= 1:
        return [fn(*args) for args in arg_list]
    with ProcessPoolExecutor(max_workers=min(jobs, len(arg_list))) as pool:
        return list(pool.map(fn, *zip(*arg_list)))


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"
