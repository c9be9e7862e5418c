"""Zero/star patterns and the combinatorics of admissible subpatterns.

A pattern is a matrix of zeros and stars; a matrix is consistent with it
when its nonzero entries sit on stars. All indices in this module are
1-based, matching the usual ``P[i_1..i_k | j_1..j_k]`` notation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence


@dataclass(frozen=True)
class BlockShape:
    """Rows ``a`` and columns ``b`` of every block of an (a,b)-block matrix."""

    a: int
    b: int

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise ValueError(f"block shape must be positive, got {self.a}x{self.b}")

    @classmethod
    def parse(cls, text: str) -> "BlockShape":
        try:
            a, b = text.lower().split("x")
            return cls(int(a), int(b))
        except ValueError:
            raise ValueError(f"cannot parse block shape {text!r}, expected e.g. '2x1'")

    def __str__(self):
        return f"{self.a}x{self.b}"


@dataclass(frozen=True)
class IndexSelection:
    """Row indices ``i_1 < ... < i_k`` and column indices ``j_1 < ... < j_k``."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(int(i) for i in self.rows))
        object.__setattr__(self, "cols", tuple(int(j) for j in self.cols))
        if len(self.rows) != len(self.cols):
            raise ValueError("row and column selections differ in length")
        for idx in (self.rows, self.cols):
            if any(i < 1 for i in idx):
                raise ValueError("indices are 1-based")
            if any(x >= y for x, y in zip(idx, idx[1:])):
                raise ValueError(f"indices must be strictly increasing: {idx}")

    @classmethod
    def principal(cls, indices: Iterable[int]) -> "IndexSelection":
        idx = tuple(indices)
        return cls(idx, idx)

    @classmethod
    def parse(cls, text: str) -> "IndexSelection":
        """Parse ``"2,3|1,2"``."""
        left, _, right = text.strip("() ").partition("|")
        rows = tuple(int(x) for x in left.split(",") if x.strip())
        cols = tuple(int(x) for x in right.split(",") if x.strip())
        return cls(rows, cols)

    def __len__(self):
        return len(self.rows)

    def __str__(self):
        return f"({','.join(map(str, self.rows))}|{','.join(map(str, self.cols))})"

    def check_bounds(self, n_rows: int, n_cols: int) -> None:
        if self.rows and self.rows[-1] > n_rows:
            raise IndexError(f"row index {self.rows[-1]} exceeds {n_rows}")
        if self.cols and self.cols[-1] > n_cols:
            raise IndexError(f"column index {self.cols[-1]} exceeds {n_cols}")

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "cols": list(self.cols)}


@dataclass(frozen=True)
class Pattern:
    """Dense 0/* grid; ``cells[a][b]`` is True where entry (a+1, b+1) is a star."""

    cells: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        cells = tuple(tuple(bool(c) for c in row) for row in self.cells)
        if not cells or not cells[0]:
            raise ValueError("patterns must have at least one row and one column")
        if any(len(row) != len(cells[0]) for row in cells):
            raise ValueError("ragged pattern")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_string(cls, text: str) -> "Pattern":
        """Build from rows separated by ``/`` or newlines, e.g. ``"*0/**"``."""
        rows = [r.strip() for r in text.replace("\n", "/").split("/") if r.strip()]
        grid = []
        for row in rows:
            row = row.replace(" ", "").replace(",", "")
            if set(row) - {"*", "0"}:
                raise ValueError(f"pattern rows may only contain '*' and '0': {row!r}")
            grid.append(tuple(c == "*" for c in row))
        return cls(tuple(grid))

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0])

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def star(self, i: int, j: int) -> bool:
        """Whether entry (i, j), 1-based, is a star."""
        return self.cells[i - 1][j - 1]

    def star_count(self) -> int:
        return sum(sum(row) for row in self.cells)

    def __str__(self):
        return "/".join("".join("*" if c else "0" for c in row) for row in self.cells)


def make_triangular(n: int) -> Pattern:
    """The n x n triangular lb-pattern ``T_n``: star at (i, j) iff i >= j."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return Pattern(tuple(tuple(i >= j for j in range(n)) for i in range(n)))


def all_star(rows: int, cols: int | None = None) -> Pattern:
    cols = rows if cols is None else cols
    return Pattern(((True,) * cols,) * rows)


def all_zero(rows: int, cols: int | None = None) -> Pattern:
    cols = rows if cols is None else cols
    return Pattern(((False,) * cols,) * rows)


def minimal_irreducible(n: int) -> Pattern:
    """The n x n lb-pattern with a zero at (i, j) exactly when i + 1 < j."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return Pattern(tuple(tuple(not (i + 1 < j) for j in range(n)) for i in range(n)))


def is_lb(p: Pattern) -> bool:
    """Every entry left of or below a star is a star."""
    cells = p.cells
    for a in range(p.rows):
        for b in range(p.cols):
            if not cells[a][b]:
                continue
            if b > 0 and not cells[a][b - 1]:
                return False
            if a + 1 < p.rows and not cells[a + 1][b]:
                return False
    return True


def is_admissible(p: Pattern) -> bool:
    return p.is_square and all(p.cells[i][i] for i in range(p.rows))


def selection_is_admissible(n: int, sel: IndexSelection) -> bool:
    """Admissibility of ``T_n[sel]``, decided from the indices alone."""
    sel.check_bounds(n, n)
    return all(i >= j for i, j in zip(sel.rows, sel.cols))


def selection_is_irreducible(sel: IndexSelection) -> bool:
    """Whether an admissible selection of ``T_n`` gives an irreducible subpattern."""
    return all(sel.rows[t] >= sel.cols[t + 1] for t in range(len(sel) - 1))


def subpattern(p: Pattern, sel: IndexSelection) -> Pattern:
    sel.check_bounds(p.rows, p.cols)
    if not sel.rows:
        raise ValueError("empty selection")
    return Pattern(tuple(tuple(p.star(i, j) for j in sel.cols) for i in sel.rows))


@dataclass(frozen=True)
class Fact2Split:
    """Result of splitting a square lb-pattern with a star in its corner.

    When the pattern is not admissible, ``m`` is the size of the largest
    admissible leading principal block, and every cell (a, b) with
    a <= m + 1 and b >= m + 1 is zero.
    """

    admissible: bool
    m: int | None = None
    zero_rows: tuple[int, int] | None = None
    zero_cols: tuple[int, int] | None = None


def fact2_split(p: Pattern) -> Fact2Split:
    if not p.is_square:
        raise ValueError("pattern must be square")
    if not p.cells[0][0]:
        raise ValueError("pattern needs a star in the upper left corner")
    n = p.rows
    m = 0
    while m < n and p.cells[m][m]:
        m += 1
    if m == n:
        return Fact2Split(admissible=True)
    # diagonal cell (m+1, m+1) is zero, so everything above and right of it is
    for a in range(m + 1):
        for b in range(m, n):
            if p.cells[a][b]:
                raise ValueError("pattern is not an lb-pattern; zero region violated")
    return Fact2Split(admissible=False, m=m, zero_rows=(1, m + 1), zero_cols=(m + 1, n))


def is_irreducible(p: Pattern) -> bool:
    """Square lb-pattern with stars on the whole superdiagonal."""
    if not p.is_square:
        raise ValueError("pattern must be square")
    return all(p.cells[i][i + 1] for i in range(p.rows - 1))


def decompose_irreducible(p: Pattern) -> list[IndexSelection]:
    """Cut an admissible pattern into maximal irreducible principal blocks."""
    if not is_admissible(p):
        raise ValueError("pattern is not admissible")
    blocks, start = [], 1
    for i in range(1, p.rows):
        if not p.cells[i - 1][i]:
            blocks.append(IndexSelection.principal(range(start, i + 1)))
            start = i + 1
    blocks.append(IndexSelection.principal(range(start, p.rows + 1)))
    return blocks


def _cols_under(rows: Sequence[int], irreducible: bool) -> Iterator[tuple[int, ...]]:
    # increasing j_1 < ... < j_k with j_t <= i_t (and j_{t+1} <= i_t if irreducible)
    k = len(rows)
    cols = [0] * k

    def rec(t: int, lo: int):
        if t == k:
            yield tuple(cols)
            return
        hi = rows[t]
        if irreducible and t > 0:
            hi = min(hi, rows[t - 1])
        for j in range(lo, hi + 1):
            cols[t] = j
            yield from rec(t + 1, j + 1)

    yield from rec(0, 1)


def _k_values(n: int, k_range) -> list[int]:
    if k_range is None:
        return list(range(1, n + 1))
    if isinstance(k_range, int):
        ks = [k_range]
    else:
        ks = sorted(set(k_range))
    if any(k < 1 or k > n for k in ks):
        raise ValueError(f"k values must lie in 1..{n}")
    return ks


def enumerate_admissible_selections(
    n: int,
    k_range: int | Iterable[int] | None = None,
    irreducible: bool = False,
) -> Iterator[IndexSelection]:
    """Yield admissible selections of ``T_n`` in (k, rows, cols) lexicographic order.

    With ``irreducible=True`` only selections whose subpattern is irreducible
    are produced.
    """
    for k in _k_values(n, k_range):
        for rows in combinations(range(1, n + 1), k):
            for cols in _cols_under(rows, irreducible):
                yield IndexSelection(rows, cols)


def count_admissible_selections(n: int, k: int) -> int:
    """Number of admissible k x k selections of ``T_n``.

    Scans values 1..n; a value may join the columns, the rows, or both, and
    admissibility is the ballot condition ``#cols >= #rows`` on every prefix.
    """
    if k < 0 or k > n:
        return 0
    ways = {(0, 0): 1}
    for _ in range(n):
        nxt: dict[tuple[int, int], int] = {}
        for (r, c), w in ways.items():
            for dr, dc in ((0, 0), (1, 0), (0, 1), (1, 1)):
                r2, c2 = r + dr, c + dc
                if r2 > k or c2 > k or r2 > c2:
                    continue
                nxt[r2, c2] = nxt.get((r2, c2), 0) + w
        ways = nxt
    return ways.get((k, k), 0)
