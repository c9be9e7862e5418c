"""Linear tree codes generated by block lower-triangular matrices.

An (s,t)-code of block length n maps a message of n blocks of length t to
a codeword of n blocks of length s through an (s,t)-block triangular
generator. Codewords are returned as integer arrays of shape (n, s).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._util import fraction_str
from .blocks import BlockMatrix
from .linalg import PrimeField, kernel_vector, matmul_mod, rank
from .patterns import BlockShape, make_triangular

DISTANCE_BUDGET = 10**7


@dataclass(frozen=True, eq=False)
class TreeCode:
    """An (s,t)-code over a prime field with flat generator of shape (sn, tn)."""

    s: int
    t: int
    n: int
    generator: np.ndarray
    field: PrimeField
    provenance: str = "custom"

    def __post_init__(self):
        if not self.s > self.t >= 1:
            raise ValueError(f"need s > t >= 1, got s={self.s}, t={self.t}")
        gen = self.field.array(self.generator)
        if gen.shape != (self.s * self.n, self.t * self.n):
            raise ValueError(f"generator must be {self.s * self.n}x{self.t * self.n}, got {gen.shape}")
        gen.setflags(write=False)
        object.__setattr__(self, "generator", gen)
        blocks = BlockMatrix(gen, BlockShape(self.s, self.t), self.field, make_triangular(self.n))
        for i in range(1, self.n + 1):
            if rank(blocks.block(i, i), self.field) < self.t:
                raise ValueError(f"diagonal block {i} is rank deficient; not a tree code")

    @property
    def rate(self) -> Fraction:
        return Fraction(self.t, self.s)

    def block(self, i: int, j: int) -> np.ndarray:
        s, t = self.s, self.t
        return self.generator[(i - 1) * s:i * s, (j - 1) * t:j * t]

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "t": self.t,
            "n": self.n,
            "q": self.field.q,
            "provenance": self.provenance,
            "generator": [[int(x) for x in row] for row in self.generator],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeCode":
        return cls(int(data["s"]), int(data["t"]), int(data["n"]), np.array(data["generator"], dtype=object),
                   PrimeField(int(data["q"])), data.get("provenance", "custom"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TreeCode":
        return cls.from_dict(json.loads(text))


def interleave_identity(M: BlockMatrix) -> TreeCode:
    """Rate-1/3 code from a (2,1)-block triangular matrix.

    Each diagonal block (x, y) becomes (1, x, y) and every other block
    (x, y) becomes (0, x, y).
    """
    if M.shape != BlockShape(2, 1):
        raise ValueError(f"expected (2,1) blocks, got {M.shape}")
    if M.field is None:
        raise ValueError("the generator must live over a prime field")
    m, n = M.block_dims
    if m != n or not M.is_consistent_with(make_triangular(n)):
        raise ValueError("matrix must be block lower triangular")
    gen = np.zeros((3 * n, n), dtype=object)
    for i in range(n):
        for j in range(i + 1):
            gen[3 * i, j] = 1 if i == j else 0
            gen[3 * i + 1, j] = int(M.payload[2 * i, j])
            gen[3 * i + 2, j] = int(M.payload[2 * i + 1, j])
    return TreeCode(3, 1, n, gen, M.field, provenance="interleave-identity")


def normal_form(M: BlockMatrix) -> TreeCode:
    """(s,t)-code from an (s-t, t)-block triangular matrix.

    Diagonal blocks get a t x t identity on top, the other blocks a t x t
    zero block, so the code is systematic.
    """
    if M.field is None:
        raise ValueError("the generator must live over a prime field")
    extra, t = M.shape.a, M.shape.b
    s = extra + t
    m, n = M.block_dims
    if m != n or not M.is_consistent_with(make_triangular(n)):
        raise ValueError("matrix must be block lower triangular")
    gen = np.zeros((s * n, t * n), dtype=object)
    for i in range(1, n + 1):
        for j in range(1, i + 1):
            top = np.eye(t, dtype=object) if i == j else np.zeros((t, t), dtype=object)
            gen[(i - 1) * s:i * s, (j - 1) * t:j * t] = np.vstack([top, M.block(i, j).astype(object)])
    return TreeCode(s, t, n, gen, M.field, provenance=f"normal-form({s},{t})")


def encode(code: TreeCode, message) -> np.ndarray:
    """Codeword blocks, shape (n, s), for a message of n blocks of length t."""
    x = np.asarray(message, dtype=object).reshape(-1)
    if x.size != code.n * code.t:
        raise ValueError(f"message needs {code.n * code.t} symbols, got {x.size}")
    x = code.field.array(x)
    y = matmul_mod(code.generator, x, code.field.q)
    return y.reshape(code.n, code.s)


def relative_weight(codeword) -> Fraction:
    """Least fraction of nonzero blocks over windows starting at the first nonzero block."""
    c = np.asarray(codeword)
    nonzero = (c != 0).any(axis=1) if c.ndim == 2 else np.asarray(c, dtype=bool)
    idx = np.nonzero(nonzero)[0]
    if idx.size == 0:
        raise ValueError("the zero codeword has no relative weight")
    k = int(idx[0])
    best = Fraction(1)
    count = 0
    for length, pos in enumerate(range(k, len(nonzero)), start=1):
        count += bool(nonzero[pos])
        best = min(best, Fraction(count, length))
    return best


def _window_minima(nonzero: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row (float minimum, count, length) of windows from the first nonzero block."""
    R, n = nonzero.shape
    first = nonzero.argmax(axis=1)
    cum = np.cumsum(nonzero, axis=1)
    before = np.where(first > 0, cum[np.arange(R), np.maximum(first - 1, 0)], 0)
    ends = np.arange(n)[None, :]
    counts = cum - before[:, None]
    lengths = ends - first[:, None] + 1
    ratio = np.where(lengths > 0, counts / np.maximum(lengths, 1), np.inf)
    best = ratio.argmin(axis=1)
    rows = np.arange(R)
    return ratio[rows, best], counts[rows, best], lengths[rows, best]


@dataclass
class DistanceReport:
    min_relative_distance: Fraction
    witness_message: list[int]
    witness_codeword: list[list[int]]
    representatives_enumerated: int

    def to_dict(self) -> dict:
        return {
            "min_relative_distance": fraction_str(self.min_relative_distance),
            "witness_message": self.witness_message,
            "witness_codeword": self.witness_codeword,
            "representatives_enumerated": self.representatives_enumerated,
        }


class BudgetExceeded(ValueError):
    pass


def _suffixes(q: int, length: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    powers = q ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def min_distance_exhaustive(code: TreeCode, budget: int = DISTANCE_BUDGET, chunk: int = 1 << 14) -> DistanceReport:
    """Exact minimum relative distance over all nonzero codewords.

    One message per projective class is enumerated (first nonzero symbol
    equal to 1); scaling does not change which blocks are nonzero. Messages
    are visited in increasing lexicographic order and the first one reaching
    the minimum is the witness.
    """
    q = code.field.q
    N = code.n * code.t
    total = (q**N - 1) // (q - 1)
    if total > budget:
        raise BudgetExceeded(f"{total} representatives exceed the budget {budget}")
    if q**max(N - 1, 0) >= 2**63:
        raise BudgetExceeded("message space too large for enumeration")
    G_T = code.generator.T
    best: Fraction | None = None
    witness = None
    seen = 0
    for p in range(N - 1, -1, -1):
        length = N - 1 - p
        for start in range(0, q**length, chunk):
            stop = min(q**length, start + chunk)
            msgs = np.zeros((stop - start, N), dtype=np.int64)
            msgs[:, p] = 1
            if length:
                msgs[:, p + 1:] = _suffixes(q, length, start, stop)
            words = matmul_mod(msgs, G_T, q).reshape(len(msgs), code.n, code.s)
            nonzero = (words != 0).any(axis=2)
            val, cnt, ln = _window_minima(nonzero)
            i = int(val.argmin())
            cand = Fraction(int(cnt[i]), int(ln[i]))
            if best is None or cand < best:
                best = cand
                witness = (msgs[i], words[i])
            seen += len(msgs)
    assert witness is not None
    return DistanceReport(best, [int(v) for v in witness[0]], [[int(v) for v in b] for b in witness[1]], seen)


@dataclass
class SingletonWitness:
    k: int
    l: int
    message: list[int]
    codeword: list[list[int]]
    weight: Fraction
    bound_k_over_kl: Fraction
    closed_form_applicable: bool
    closed_form_bound: Fraction | None
    rate_plus_weight: Fraction
    rate_plus_weight_bound: Fraction | None

    def to_dict(self) -> dict:
        opt = lambda x: fraction_str(x) if x is not None else None  # noqa: E731
        return {
            "k": self.k,
            "l": self.l,
            "message": self.message,
            "codeword": self.codeword,
            "weight": fraction_str(self.weight),
            "bound_k_over_kl": fraction_str(self.bound_k_over_kl),
            "closed_form_applicable": self.closed_form_applicable,
            "closed_form_bound": opt(self.closed_form_bound),
            "rate_plus_weight": fraction_str(self.rate_plus_weight),
            "rate_plus_weight_bound": opt(self.rate_plus_weight_bound),
        }


def singleton_l(s: int, t: int, k: int) -> int:
    """Largest l with (s - t) * l < k * t."""
    return (k * t - 1) // (s - t)


def singleton_witness(code: TreeCode, k: int) -> SingletonWitness:
    """Build a low-weight codeword showing rate + distance cannot beat 1 by much.

    A nonzero message supported on the first k blocks is chosen so that
    codeword blocks k+1..k+l vanish; the window from the first nonzero block
    to block k+l then has relative weight at most k/(k+l).
    """
    s, t, n, q = code.s, code.t, code.n, code.field.q
    if k < 1:
        raise ValueError("k must be positive")
    l = singleton_l(s, t, k)
    if k + l > n:
        raise ValueError(f"k + l = {k + l} exceeds the block length {n}")
    N = np.asarray(code.generator[k * s:(k + l) * s, :k * t])
    heads = np.concatenate([N[r * s:r * s + t] for r in range(l)]) if l else np.zeros((0, k * t))
    if np.any(heads != 0):
        raise ValueError("code is not in normal form")
    tails = np.concatenate([N[r * s + t:(r + 1) * s] for r in range(l)]) if l else np.zeros((0, k * t), dtype=object)
    if l:
        x = kernel_vector(tails, code.field)
    else:
        x = [1] + [0] * (k * t - 1)
    if x is None:
        raise RuntimeError("no kernel vector although (s-t)l < kt")
    message = list(x) + [0] * ((n - k) * t)
    word = encode(code, message)
    nonzero = (word != 0).any(axis=1)
    if nonzero[k:k + l].any():
        raise RuntimeError("witness codeword is nonzero on blocks k+1..k+l")
    if not nonzero[:k].any():
        raise RuntimeError("witness codeword vanishes on the first k blocks")
    weight = relative_weight(word)
    bound = Fraction(k, k + l)
    if weight > bound:
        raise RuntimeError(f"weight {weight} exceeds k/(k+l) = {bound}")
    closed = (k * t - 1) % (s - t) == 0
    closed_bound = rpw_bound = None
    rate = Fraction(t, s)
    if closed:
        closed_bound = Fraction(s - t) / (s - Fraction(1, k))
        rpw_bound = 1 + (1 - rate) / (s * k - 1)
        if weight > closed_bound or rate + weight > rpw_bound:
            raise RuntimeError("closed-form Singleton bound violated")
    return SingletonWitness(k, l, [int(v) for v in message], [[int(v) for v in b] for b in word], weight,
                            bound, closed, closed_bound, rate + weight, rpw_bound)
