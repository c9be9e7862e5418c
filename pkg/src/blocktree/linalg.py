"""Exact linear algebra over prime fields GF(q) and over the integers.

Field matrices are numpy arrays of residues. For ``q < 2**31`` they use
``int64`` (products of two residues fit); larger moduli use ``object``
arrays holding Python ints. Integer matrices are ``object`` arrays or plain
nested lists of Python ints.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import factorial
from typing import Sequence

import numpy as np
from sympy import isprime

from .patterns import BlockShape, IndexSelection

INT64_SAFE_MODULUS = 2**31


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        q = int(self.q)
        if q < 2 or not isprime(q):
            raise ValueError(f"{q} is not prime")
        object.__setattr__(self, "q", q)

    @property
    def dtype(self):
        return np.int64 if self.q < INT64_SAFE_MODULUS else object

    def array(self, values) -> np.ndarray:
        """Reduce ``values`` into a residue array of this field."""
        arr = np.array(values, dtype=object)
        if arr.size:
            arr = np.vectorize(lambda x: int(x) % self.q, otypes=[object])(arr)
        return arr.astype(self.dtype)

    def inv(self, x: int) -> int:
        x %= self.q
        if x == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(x, -1, self.q)

    def __str__(self):
        return f"GF({self.q})"


def _rows(mat) -> list[list[int]]:
    return [[int(x) for x in row] for row in np.asarray(mat, dtype=object)]


def _echelon(rows: list[list[int]], q: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form mod q. Returns (rows, pivot columns)."""
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    rows = [[x % q for x in row] for row in rows]
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = pow(rows[r][c], -1, q)
        pivot_row = [x * inv % q for x in rows[r]]
        rows[r] = pivot_row
        for i in range(n_rows):
            f = rows[i][c]
            if i != r and f:
                rows[i] = [(x - f * y) % q for x, y in zip(rows[i], pivot_row)]
        pivots.append(c)
        r += 1
    return rows, pivots


def rank(mat, field: PrimeField) -> int:
    """Rank of ``mat`` over ``field`` by exact Gaussian elimination."""
    rows = _rows(mat)
    if not rows or not rows[0]:
        return 0
    return len(_echelon(rows, field.q)[1])


def _powmod(base: np.ndarray, exp: int, q: int) -> np.ndarray:
    result = np.ones_like(base)
    base = base % q
    while exp:
        if exp & 1:
            result = result * base % q
        base = base * base % q
        exp >>= 1
    return result


def rank_batch(mats: np.ndarray, q: int) -> np.ndarray:
    """Ranks of a stack of matrices, shape (B, r, c), over GF(q), q < 2**31."""
    if q >= INT64_SAFE_MODULUS:
        return np.array([rank(m, PrimeField(q)) for m in mats], dtype=np.int64)
    A = np.array(mats, dtype=np.int64) % q
    B, r, c = A.shape
    ranks = np.zeros(B, dtype=np.int64)
    row_ids = np.arange(r)
    for j in range(c):
        cand = (A[:, :, j] != 0) & (row_ids[None, :] >= ranks[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.nonzero(has)[0]
        piv = cand[b].argmax(axis=1)
        tgt = ranks[b]
        tmp = A[b, piv].copy()
        A[b, piv] = A[b, tgt]
        A[b, tgt] = tmp
        inv = _powmod(A[b, tgt, j], q - 2, q)
        prow = A[b, tgt] * inv[:, None] % q
        A[b, tgt] = prow
        f = A[b, :, j].copy()
        f[np.arange(len(b)), tgt] = 0
        A[b] = (A[b] - f[:, :, None] * prow[:, None, :]) % q
        ranks[b] += 1
    return ranks


def kernel_vector(mat, field: PrimeField) -> list[int] | None:
    """A nonzero x with ``mat @ x == 0`` (mod q), or None if none exists.

    The vector sets the first free column to 1 and the other free columns
    to 0, then is scaled so its first nonzero coordinate is 1.
    """
    rows = _rows(mat)
    q = field.q
    n_cols = len(rows[0]) if rows else np.asarray(mat).shape[1]
    if not rows:
        return [1] + [0] * (n_cols - 1) if n_cols else None
    ech, pivots = _echelon(rows, q)
    free = [c for c in range(n_cols) if c not in set(pivots)]
    if not free:
        return None
    f = free[0]
    x = [0] * n_cols
    x[f] = 1
    for r, c in enumerate(pivots):
        x[c] = -ech[r][f] % q
    lead = next(v for v in x if v)
    inv = pow(lead, -1, q)
    return [v * inv % q for v in x]


def det_int(mat) -> int:
    """Exact integer determinant by fraction-free (Bareiss) elimination."""
    A = _rows(mat)
    n = len(A)
    if any(len(row) != n for row in A):
        raise ValueError("determinant needs a square matrix")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            p = next((i for i in range(k + 1, n) if A[i][k]), None)
            if p is None:
                return 0
            A[k], A[p] = A[p], A[k]
            sign = -sign
        akk = A[k][k]
        for i in range(k + 1, n):
            aik = A[i][k]
            row_i, row_k = A[i], A[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
            row_i[k] = 0
        prev = akk
    return sign * A[n - 1][n - 1]


def det_batch_small(mats: np.ndarray) -> np.ndarray | None:
    """Exact determinants of an int64 stack (B, n, n) by the Leibniz expansion.

    Returns None when the Hadamard-free bound ``n! * max|a|**n`` could
    overflow int64; callers then fall back to :func:`det_int`.
    """
    A = np.asarray(mats, dtype=np.int64)
    B, n, n2 = A.shape
    if n != n2:
        raise ValueError("determinant needs square matrices")
    if n == 0:
        return np.ones(B, dtype=np.int64)
    bound = int(np.abs(A).max()) if A.size else 0
    if factorial(n) * bound**n >= 2**62:
        return None
    total = np.zeros(B, dtype=np.int64)
    for perm in permutations(range(n)):
        term = np.ones(B, dtype=np.int64)
        for i, j in enumerate(perm):
            term = term * A[:, i, j]
        total += _perm_sign(perm) * term
    return total


def _perm_sign(perm: tuple[int, ...]) -> int:
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def rank_int(mat) -> int:
    """Rank over the rationals."""
    rows = [[Fraction(x) for x in row] for row in _rows(mat)]
    if not rows:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    r = 0
    for c in range(n_cols):
        p = next((i for i in range(r, n_rows) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        for i in range(r + 1, n_rows):
            f = rows[i][c] / rows[r][c]
            if f:
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        r += 1
        if r == n_rows:
            break
    return r


def block_indices(sel: IndexSelection, shape: BlockShape) -> tuple[list[int], list[int]]:
    """0-based flat row and column indices of the blocks picked by ``sel``."""
    rows = [(i - 1) * shape.a + r for i in sel.rows for r in range(shape.a)]
    cols = [(j - 1) * shape.b + c for j in sel.cols for c in range(shape.b)]
    return rows, cols


def extract(mat: np.ndarray, sel: IndexSelection, shape: BlockShape = BlockShape(1, 1)) -> np.ndarray:
    """Flattened submatrix ``M[sel]`` of a block matrix given by its flat array."""
    mat = np.asarray(mat)
    sel.check_bounds(mat.shape[0] // shape.a, mat.shape[1] // shape.b)
    rows, cols = block_indices(sel, shape)
    return mat[np.ix_(rows, cols)]


def flatten(blocks, shape: BlockShape | None = None) -> np.ndarray:
    """Forget block structure: m x n grid of a x b blocks -> (am) x (bn) matrix."""
    grid = [[np.asarray(blk) for blk in row] for row in blocks]
    if not grid or not grid[0]:
        raise ValueError("empty block matrix")
    if any(len(row) != len(grid[0]) for row in grid):
        raise ValueError("ragged block grid")
    first = grid[0][0]
    if first.ndim == 1:
        grid = [[blk.reshape(-1, 1) for blk in row] for row in grid]
        first = grid[0][0]
    a, b = first.shape
    if shape is not None and (shape.a, shape.b) != (a, b):
        raise ValueError(f"blocks are {a}x{b}, expected {shape}")
    for row in grid:
        for blk in row:
            if blk.shape != (a, b):
                raise ValueError("ragged blocks")
    return np.block(grid)


def unflatten(mat, shape: BlockShape) -> np.ndarray:
    """Re-block a flat matrix into an array of shape (m, n, a, b)."""
    mat = np.asarray(mat)
    R, C = mat.shape
    if R % shape.a or C % shape.b:
        raise ValueError(f"{R}x{C} matrix cannot be cut into {shape} blocks")
    m, n = R // shape.a, C // shape.b
    return mat.reshape(m, shape.a, n, shape.b).transpose(0, 2, 1, 3)


def matmul_mod(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    """``A @ B mod q`` without int64 overflow."""
    A = np.asarray(A)
    B = np.asarray(B)
    inner = A.shape[-1]
    if q < INT64_SAFE_MODULUS and (q - 1) ** 2 * max(inner, 1) < 2**63:
        return (A.astype(np.int64) @ B.astype(np.int64)) % q
    out = A.astype(object) @ B.astype(object)
    return np.vectorize(lambda x: int(x) % q, otypes=[object])(out)


# --- matrix text format ---------------------------------------------------


def format_matrix(mat, field: PrimeField | None = None) -> str:
    """Render ``gf <q> <rows> <cols>`` or ``int <rows> <cols>`` plus rows."""
    rows = _rows(mat)
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    header = f"gf {field.q} {n_rows} {n_cols}" if field else f"int {n_rows} {n_cols}"
    return "\n".join([header] + [" ".join(str(x) for x in row) for row in rows]) + "\n"


def parse_matrix(text: str) -> tuple[PrimeField | None, np.ndarray]:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty matrix text")
    head = lines[0].split()
    try:
        if head[0] == "gf" and len(head) == 4:
            field: PrimeField | None = PrimeField(int(head[1]))
            n_rows, n_cols = int(head[2]), int(head[3])
        elif head[0] == "int" and len(head) == 3:
            field = None
            n_rows, n_cols = int(head[1]), int(head[2])
        else:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad matrix header: {lines[0]!r}")
    body = [[int(x) for x in ln.split()] for ln in lines[1:]]
    if len(body) != n_rows or any(len(row) != n_cols for row in body):
        raise ValueError(f"matrix body does not match header {n_rows}x{n_cols}")
    if field is not None:
        if any(not 0 <= x < field.q for row in body for x in row):
            raise ValueError(f"gf entries must lie in [0, {field.q})")
        return field, np.array(body, dtype=field.dtype).reshape(n_rows, n_cols)
    return None, np.array(body, dtype=object).reshape(n_rows, n_cols)


def read_matrix(path) -> tuple[PrimeField | None, np.ndarray]:
    with open(path) as fh:
        return parse_matrix(fh.read())


def write_matrix(path, mat, field: PrimeField | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(format_matrix(mat, field))


def identity(n: int, field: PrimeField) -> np.ndarray:
    return np.eye(n, dtype=np.int64).astype(field.dtype)


def as_int_matrix(values: Sequence[Sequence[int]]) -> np.ndarray:
    return np.array([[int(x) for x in row] for row in values], dtype=object)
