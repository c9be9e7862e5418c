"""Block-triangular matrices: constructions and total-rank verification.

The central property is *totally full rank*: for an (a,b)-block matrix
consistent with ``T_n`` (a >= b), every admissible block submatrix has full
column rank once the blocks are forgotten. For (1,1) blocks this is the
classical triangular totally nonsingular property.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import islice
from typing import Iterable, Iterator

import numpy as np

from ._util import fan_out, make_rng
from .linalg import (
    PrimeField,
    block_indices,
    det_int,
    extract,
    format_matrix,
    rank,
    rank_batch,
    rank_int,
    unflatten,
)
from .patterns import (
    BlockShape,
    IndexSelection,
    Pattern,
    count_admissible_selections,
    enumerate_admissible_selections,
    make_triangular,
)

EXHAUSTIVE_LIMIT = 14
CHUNK = 2048
CACHE_LIMIT = 50_000


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """A flat matrix viewed as an m x n grid of (a,b) blocks.

    ``field`` is None for integer matrices. The matrix must be consistent
    with ``pattern`` (blocks at pattern zeros are zero); the pattern
    defaults to ``T_n`` for square block grids.
    """

    payload: np.ndarray
    shape: BlockShape
    field: PrimeField | None = None
    pattern: Pattern | None = None

    def __post_init__(self):
        if self.field is not None:
            payload = self.field.array(self.payload)
        else:
            payload = np.array([[int(x) for x in row] for row in np.asarray(self.payload, dtype=object)],
                               dtype=object)
        if payload.ndim != 2:
            raise ValueError("payload must be a 2-d matrix")
        R, C = payload.shape
        if R % self.shape.a or C % self.shape.b:
            raise ValueError(f"{R}x{C} payload does not split into {self.shape} blocks")
        payload.setflags(write=False)
        object.__setattr__(self, "payload", payload)
        m, n = self.block_dims
        pattern = self.pattern
        if pattern is None:
            if m != n:
                raise ValueError("a pattern is required for non-square block grids")
            pattern = make_triangular(n)
            object.__setattr__(self, "pattern", pattern)
        if (pattern.rows, pattern.cols) != (m, n):
            raise ValueError(f"pattern is {pattern.rows}x{pattern.cols}, block grid is {m}x{n}")
        bad = self.inconsistent_blocks(pattern)
        if bad:
            raise ValueError(f"block {bad[0]} is nonzero at a pattern zero")

    @property
    def block_dims(self) -> tuple[int, int]:
        R, C = self.payload.shape
        return R // self.shape.a, C // self.shape.b

    @property
    def n(self) -> int:
        return self.block_dims[1]

    def block(self, i: int, j: int) -> np.ndarray:
        a, b = self.shape.a, self.shape.b
        return self.payload[(i - 1) * a:i * a, (j - 1) * b:j * b]

    def blocks(self) -> np.ndarray:
        return unflatten(self.payload, self.shape)

    def inconsistent_blocks(self, pattern: Pattern) -> list[tuple[int, int]]:
        nonzero = (self.blocks() != 0).any(axis=(2, 3))
        return [(i + 1, j + 1) for i in range(pattern.rows) for j in range(pattern.cols)
                if not pattern.cells[i][j] and nonzero[i, j]]

    def is_consistent_with(self, pattern: Pattern) -> bool:
        return (pattern.rows, pattern.cols) == self.block_dims and not self.inconsistent_blocks(pattern)

    def to_text(self) -> str:
        return format_matrix(self.payload, self.field)


@dataclass(frozen=True)
class FailureWitness:
    selection: IndexSelection
    rank: int

    def to_dict(self) -> dict:
        return {**self.selection.to_dict(), "rank": self.rank}


@dataclass
class VerificationReport:
    verified: bool
    mode: str
    checked_count: int
    failure: FailureWitness | None = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.verified and self.failure is None:
            raise ValueError("a failed verification needs a witness")

    @property
    def conclusive(self) -> bool:
        return self.mode == "exhaustive" or not self.verified

    def to_dict(self) -> dict:
        return {
            "verified": self.verified,
            "mode": self.mode,
            "conclusive": self.conclusive,
            "checked_count": self.checked_count,
            "failure": self.failure.to_dict() if self.failure else None,
            "params": self.params,
        }


# --- constructions -----------------------------------------------------------


def _seed_key(seed) -> tuple[int, ...]:
    return tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)


def random_consistent(pattern: Pattern, shape: BlockShape, field: PrimeField, seed=0) -> BlockMatrix:
    """Uniform residues on star blocks, zeros elsewhere.

    ``seed`` is an int or a tuple such as ``(seed, trial_index)``.
    """
    if field.q >= 2**63:
        raise ValueError("random sampling supports q < 2**63")
    flat = random_block_payload(np.array(pattern.cells, dtype=bool), shape, field.q, _seed_key(seed))
    return BlockMatrix(flat, shape, field, pattern)


def random_block_payload(mask: np.ndarray, shape: BlockShape, q: int, key: tuple[int, ...]) -> np.ndarray:
    """Flat int64 payload behind :func:`random_consistent`."""
    rng = make_rng(*key)
    m, n = mask.shape
    vals = rng.integers(0, q, size=(m, n, shape.a, shape.b), dtype=np.int64)
    vals[~mask] = 0
    return vals.transpose(0, 2, 1, 3).reshape(m * shape.a, n * shape.b)


def random_int_consistent(pattern: Pattern, m: int, seed=0) -> np.ndarray:
    """Integer matrix with entries uniform on [-m, m] at stars, as an object array."""
    rng = make_rng(*_seed_key(seed))
    vals = rng.integers(-m, m + 1, size=(pattern.rows, pattern.cols), dtype=np.int64)
    vals[~np.array(pattern.cells, dtype=bool)] = 0
    return vals.astype(object)


def _pascal_rows(size: int, q: int | None) -> list[list[int]]:
    rows = [[1] + [0] * (size - 1)]
    for i in range(1, size):
        prev = rows[-1]
        row = [1] + [prev[j - 1] + prev[j] for j in range(1, size)]
        if q is not None:
            row = [x % q for x in row]
        rows.append(row)
    return rows


def pascal_triangular(n: int, modulus: PrimeField | None = None) -> BlockMatrix:
    """n x n lower-triangular Pascal matrix, entry (i, j) = C(i-1, j-1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rows = _pascal_rows(n, modulus.q if modulus else None)
    return BlockMatrix(rows, BlockShape(1, 1), modulus)


INDEXINGS = ("odd-0-based", "odd-1-based")


def pascal_odd_columns(n: int, field: PrimeField | None = None, indexing: str = "odd-0-based") -> BlockMatrix:
    """Odd columns of the 2n x 2n Pascal matrix as an n x n grid of (2,1) blocks.

    ``odd-0-based`` keeps 0-based columns 1, 3, ..., 2n-1; ``odd-1-based``
    keeps 1-based columns 1, 3, ..., 2n-1.
    """
    if indexing not in INDEXINGS:
        raise ValueError(f"indexing must be one of {INDEXINGS}")
    if n < 1:
        raise ValueError("n must be at least 1")
    rows = _pascal_rows(2 * n, field.q if field else None)
    start = 1 if indexing == "odd-0-based" else 0
    keep = range(start, 2 * n, 2)
    return BlockMatrix([[row[c] for c in keep] for row in rows], BlockShape(2, 1), field)


# --- exhaustive verification engine -------------------------------------------


@lru_cache(maxsize=64)
def _selection_table(n: int, a: int, b: int, k: int, irreducible: bool):
    sels = list(enumerate_admissible_selections(n, k, irreducible=irreducible))
    return sels, _index_arrays(sels, BlockShape(a, b))


def _index_arrays(sels: list[IndexSelection], shape: BlockShape) -> tuple[np.ndarray, np.ndarray]:
    pairs = [block_indices(s, shape) for s in sels]
    rows = np.array([p[0] for p in pairs], dtype=np.intp)
    cols = np.array([p[1] for p in pairs], dtype=np.intp)
    return rows, cols


def _chunks(n: int, shape: BlockShape, k: int, irreducible: bool = False
            ) -> Iterator[tuple[list[IndexSelection], np.ndarray, np.ndarray]]:
    if count_admissible_selections(n, k) <= CACHE_LIMIT:
        sels, (rows, cols) = _selection_table(n, shape.a, shape.b, k, irreducible)
        for s in range(0, len(sels), CHUNK):
            yield sels[s:s + CHUNK], rows[s:s + CHUNK], cols[s:s + CHUNK]
        return
    stream = enumerate_admissible_selections(n, k, irreducible=irreducible)
    while True:
        sels = list(islice(stream, CHUNK))
        if not sels:
            return
        rows, cols = _index_arrays(sels, shape)
        yield sels, rows, cols


def _scan_full_rank(payload: np.ndarray, a: int, b: int, q: int, n: int,
                    ks: tuple[int, ...], part: int, parts: int):
    """Scan this worker's share of the selection stream.

    Chunks are dealt round-robin; the scan stops at the first rank-deficient
    selection. Returns (examined, first failing global index or None,
    witness selection, witness rank).
    """
    shape = BlockShape(a, b)
    examined = 0
    offset = 0
    chunk_id = 0
    for k in ks:
        for sels, rows, cols in _chunks(n, shape, k):
            if chunk_id % parts == part:
                subs = payload[rows[:, :, None], cols[:, None, :]]
                ranks = rank_batch(subs, q)
                bad = np.nonzero(ranks < b * k)[0]
                if bad.size:
                    i = int(bad[0])
                    return examined + i + 1, offset + i, sels[i], int(ranks[i])
                examined += len(sels)
            offset += len(sels)
            chunk_id += 1
    return examined, None, None, None


def full_rank_failures(payloads: np.ndarray, shape: BlockShape, q: int) -> np.ndarray:
    """For a stack of flat block-triangular payloads, flag those not totally full rank."""
    B = payloads.shape[0]
    n = payloads.shape[2] // shape.b
    failed = np.zeros(B, dtype=bool)
    for k in range(1, n + 1):
        for _, rows, cols in _chunks(n, shape, k):
            subs = payloads[:, rows[:, :, None], cols[:, None, :]]
            S = subs.shape[1]
            ranks = rank_batch(subs.reshape(B * S, *subs.shape[2:]), q).reshape(B, S)
            failed |= (ranks < shape.b * k).any(axis=1)
    return failed


def _check_triangular(M: BlockMatrix) -> None:
    m, n = M.block_dims
    if m != n:
        raise ValueError("block grid must be square")
    if not M.is_consistent_with(make_triangular(n)):
        raise ValueError("matrix is not block lower triangular")


def _ks(n: int, k_range) -> tuple[int, ...]:
    if k_range is None:
        return tuple(range(1, n + 1))
    if isinstance(k_range, int):
        return (k_range,)
    return tuple(sorted(set(k_range)))


def verify_totally_full_rank(
    M: BlockMatrix,
    mode: str = "exhaustive",
    *,
    trials: int = 1000,
    seed: int = 0,
    jobs: int = 1,
    k_range: Iterable[int] | int | None = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    indexing: str | None = None,
) -> VerificationReport:
    """Check that every admissible block submatrix has full column rank.

    ``exhaustive`` mode visits every admissible selection in (k, rows, cols)
    order and reports the least failing one, so a True verdict is a proof.
    ``sampled`` mode checks ``trials`` random admissible selections and can
    only refute.
    """
    if M.field is None:
        raise ValueError("totally-full-rank verification needs a prime field")
    a, b = M.shape.a, M.shape.b
    if a < b:
        raise ValueError(f"block shape {M.shape} has fewer rows than columns")
    _check_triangular(M)
    n = M.n
    q = M.field.q
    params = {"n": n, "q": q, "shape": str(M.shape), "indexing": indexing}
    if mode == "exhaustive":
        if n > exhaustive_limit:
            raise ValueError(f"n={n} exceeds the exhaustive limit {exhaustive_limit}; use sampled mode")
        ks = _ks(n, k_range)
        total = sum(count_admissible_selections(n, k) for k in ks)
        parts = max(1, jobs)
        payload = M.payload
        results = fan_out(_scan_full_rank, [(payload, a, b, q, n, ks, w, parts) for w in range(parts)], jobs)
        fails = [r for r in results if r[1] is not None]
        if not fails:
            return VerificationReport(True, "exhaustive", total, None, params)
        _, idx, sel, rk = min(fails, key=lambda r: r[1])
        return VerificationReport(False, "exhaustive", idx + 1, FailureWitness(sel, rk), params)
    if mode == "sampled":
        params.update(seed=seed, trials=trials)
        rng = make_rng(seed)
        for t in range(trials):
            sel = _random_admissible(rng, n)
            rk = rank(extract(M.payload, sel, M.shape), M.field)
            if rk < b * len(sel):
                return VerificationReport(False, "sampled", t + 1, FailureWitness(sel, rk), params)
        return VerificationReport(True, "sampled", trials, None, params)
    raise ValueError(f"unknown mode {mode!r}")


def _random_admissible(rng: np.random.Generator, n: int) -> IndexSelection:
    while True:
        k = int(rng.integers(1, n + 1))
        rows = np.sort(rng.choice(n, size=k, replace=False)) + 1
        cols = np.sort(rng.choice(n, size=k, replace=False)) + 1
        if np.all(rows >= cols):
            return IndexSelection(tuple(rows.tolist()), tuple(cols.tolist()))


def _int_matrix(M) -> np.ndarray:
    if isinstance(M, BlockMatrix):
        if M.shape != BlockShape(1, 1) or M.field is not None:
            raise ValueError("expected an integer matrix with (1,1) blocks")
        return M.payload
    return np.array([[int(x) for x in row] for row in np.asarray(M, dtype=object)], dtype=object)


def admissible_minors(M, irreducible: bool = False) -> Iterator[tuple[IndexSelection, int]]:
    """Yield (selection, determinant) for the admissible minors of an integer matrix."""
    A = _int_matrix(M)
    n = A.shape[0]
    for sel in enumerate_admissible_selections(n, irreducible=irreducible):
        yield sel, det_int(extract(A, sel))


def verify_int_totally_nonsingular(M, selections: str = "irreducible") -> VerificationReport:
    """Check integer triangular total nonsingularity.

    By default only irreducible admissible minors are examined; an admissible
    matrix is nonsingular iff its irreducible diagonal blocks are, so this
    suffices. ``selections="admissible"`` checks every admissible minor.
    """
    if selections not in ("irreducible", "admissible"):
        raise ValueError("selections must be 'irreducible' or 'admissible'")
    A = _int_matrix(M)
    n, n2 = A.shape
    if n != n2:
        raise ValueError("matrix must be square")
    if any(A[i, j] != 0 for i in range(n) for j in range(i + 1, n)):
        raise ValueError("matrix is not lower triangular")
    params = {"n": n, "q": None, "shape": "1x1", "selections": selections}
    checked = 0
    for sel, det in admissible_minors(A, irreducible=selections == "irreducible"):
        checked += 1
        if det == 0:
            rk = rank_int(extract(A, sel))
            return VerificationReport(False, "exhaustive", checked, FailureWitness(sel, rk), params)
    return VerificationReport(True, "exhaustive", checked, None, params)


def bcn_strong_check(M: BlockMatrix, sel: IndexSelection, limit: int = 20) -> bool:
    """Whether one row from each (odd, even) row pair of ``M[sel]`` gives a nonsingular matrix."""
    if M.shape != BlockShape(2, 1):
        raise ValueError("the strong check is defined for (2,1) blocks")
    if M.field is None:
        raise ValueError("the strong check needs a prime field")
    k = len(sel)
    if k > limit:
        raise ValueError(f"k={k} exceeds the strong-check limit {limit}")
    if not all(i >= j for i, j in zip(sel.rows, sel.cols)):
        raise ValueError(f"selection {sel} is not admissible")
    sub = np.asarray(extract(M.payload, sel, M.shape))
    q = M.field.q
    base = 2 * np.arange(k)
    for start in range(0, 2**k, CHUNK):
        masks = np.arange(start, min(2**k, start + CHUNK), dtype=np.int64)
        bits = (masks[:, None] >> np.arange(k)[None, :]) & 1
        choice = sub[base[None, :] + bits]
        if (rank_batch(choice, q) == k).any():
            return True
    return False


def bcn_strong_verify(M: BlockMatrix) -> VerificationReport:
    """Strong check on every admissible selection, in enumeration order."""
    _check_triangular(M)
    n = M.n
    params = {"n": n, "q": M.field.q if M.field else None, "shape": str(M.shape), "check": "bcn-strong"}
    checked = 0
    for sel in enumerate_admissible_selections(n):
        checked += 1
        if not bcn_strong_check(M, sel):
            rk = rank(extract(M.payload, sel, M.shape), M.field)
            return VerificationReport(False, "exhaustive", checked, FailureWitness(sel, rk), params)
    return VerificationReport(True, "exhaustive", checked, None, params)
