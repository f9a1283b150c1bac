"""Linear algebra over F_2 on integer bitsets.

A vector of F_2^n is stored as a Python ``int`` in ``[0, 2**n)``. Bit 0 of
the vector is the most significant bit of the integer, so integer order is
exactly the MSB-first lexicographic order and the integer doubles as the
computational-basis index of the matching statevector amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import ParameterError
from .rng import RandomStream

MAX_DIM = 64


def to_bits(v: int, n: int) -> tuple[int, ...]:
    return tuple((v >> (n - 1 - j)) & 1 for j in range(n))


def from_bits(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        if b not in (0, 1, True, False):
            raise ParameterError(f"bit values must be 0/1, got {b!r}")
        v = (v << 1) | int(b)
    return v


def as_vector(v, n: int) -> int:
    """Coerce an int or a 0/1 sequence to a vector of F_2^n."""
    if hasattr(v, "__index__") and not isinstance(v, bool):
        v = v.__index__()
        if v < 0 or v >> n:
            raise ParameterError(f"vector {v} does not fit in {n} bits")
        return v
    bits = list(v)
    if len(bits) != n:
        raise ParameterError(f"vector has length {len(bits)}, expected {n}")
    return from_bits(bits)


def dot(u: int, v: int) -> int:
    """Standard inner product over F_2."""
    return (u & v).bit_count() & 1


def _pivot(row: int, n: int) -> int:
    return n - row.bit_length()


def rref(vectors: Iterable[int], n: int) -> tuple[int, ...]:
    """Reduced row-echelon basis of the span, rows ordered by pivot column."""
    rows: list[int] = []
    for v in vectors:
        for r in rows:
            if v & (1 << (n - 1 - _pivot(r, n))):
                v ^= r
        if not v:
            continue
        bit = 1 << (v.bit_length() - 1)
        rows = [r ^ v if r & bit else r for r in rows]
        rows.append(v)
    return tuple(sorted(rows, reverse=True))


@dataclass(frozen=True)
class Subspace:
    """Subspace of F_2^n held as its canonical RREF basis."""

    n: int
    basis: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.n <= MAX_DIM:
            raise ParameterError(f"ambient dimension {self.n} outside [0, {MAX_DIM}]")
        if rref(self.basis, self.n) != tuple(self.basis):
            raise ParameterError("basis is not in canonical RREF; use Subspace.span")

    @classmethod
    def span(cls, n: int, vectors: Iterable) -> "Subspace":
        return cls(n, rref((as_vector(v, n) for v in vectors), n))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, tuple(1 << (n - 1 - j) for j in range(n)))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(n, ())

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(_pivot(r, self.n) for r in self.basis)

    def reduce(self, v: int) -> int:
        """Clear every pivot position of ``v`` using the basis rows."""
        n = self.n
        for r in self.basis:
            if v & (1 << (n - 1 - _pivot(r, n))):
                v ^= r
        return v

    def contains(self, v: int) -> bool:
        return self.reduce(as_vector(v, self.n)) == 0

    def elements(self) -> list[int]:
        out = [0]
        for r in self.basis:
            out += [x ^ r for x in out]
        return sorted(out)

    def __len__(self) -> int:
        return 1 << self.rank

    def to_hex(self) -> list[str]:
        width = max(1, (self.n + 3) // 4)
        return [format(r, f"0{width}x") for r in self.basis]

    @classmethod
    def from_hex(cls, n: int, rows: Sequence[str]) -> "Subspace":
        return cls(n, tuple(int(r, 16) for r in rows))


def dual(a: Subspace) -> Subspace:
    """Orthogonal complement under the standard inner product."""
    n = a.n
    pivots = a.pivots
    piv_set = set(pivots)
    out = []
    for f in range(n):
        if f in piv_set:
            continue
        w = 1 << (n - 1 - f)
        for row, p in zip(a.basis, pivots):
            if row & (1 << (n - 1 - f)):
                w |= 1 << (n - 1 - p)
        out.append(w)
    return Subspace(n, rref(out, n))


def coset_contains(a: Subspace, offset, v) -> bool:
    """True iff ``v - offset`` lies in ``a``."""
    off = as_vector(offset, a.n)
    return a.reduce(as_vector(v, a.n) ^ off) == 0


def canonical(a: Subspace, v) -> int:
    """Lexicographically smallest element of the coset ``a + v``.

    Full reduction zeroes every pivot position. Any other coset element
    differs by a nonzero ``w`` in ``a``, whose leading bit sits on a pivot, so
    it is strictly larger.
    """
    return a.reduce(as_vector(v, a.n))


def sample_subspace(n: int, d: int, rng: RandomStream) -> Subspace:
    """Uniform rank-``d`` subspace of F_2^n by rejection on random d x n matrices."""
    if not 0 <= d <= n:
        raise ParameterError(f"subspace rank {d} must lie in [0, {n}]")
    if n > MAX_DIM:
        raise ParameterError(f"ambient dimension {n} exceeds {MAX_DIM}")
    while True:
        rows = [rng.bits(n) for _ in range(d)]
        basis = rref(rows, n)
        if len(basis) == d:
            return Subspace(n, basis)


@dataclass(frozen=True)
class CosetTriple:
    space: Subspace
    s: int
    s_prime: int

    def __post_init__(self):
        as_vector(self.s, self.space.n)
        as_vector(self.s_prime, self.space.n)

    @property
    def n(self) -> int:
        return self.space.n

    def contains(self, basis_bit: int, v: int) -> bool:
        """Membership in ``A + s`` (basis 0) or ``A^perp + s'`` (basis 1)."""
        if basis_bit:
            return coset_contains(dual(self.space), self.s_prime, v)
        return coset_contains(self.space, self.s, v)

    def to_json(self) -> dict:
        width = max(1, (self.n + 3) // 4)
        return {
            "n": self.n,
            "basis": self.space.to_hex(),
            "s": format(self.s, f"0{width}x"),
            "s_prime": format(self.s_prime, f"0{width}x"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CosetTriple":
        n = int(obj["n"])
        return cls(Subspace.from_hex(n, obj["basis"]), int(obj["s"], 16), int(obj["s_prime"], 16))


@dataclass(frozen=True)
class CosetParams:
    """Desk-scale CosetGen parameters: ambient dim, subspace dim, triple count."""

    n: int
    d: int
    count: int
    paper_mode: bool = False

    def __post_init__(self):
        if not 0 <= self.n <= MAX_DIM:
            raise ParameterError(f"ambient dimension {self.n} outside [0, {MAX_DIM}]")
        if not 0 <= self.d <= self.n:
            raise ParameterError(f"subspace dimension {self.d} must lie in [0, {self.n}]")
        if self.count < 1:
            raise ParameterError("coset count must be at least 1")
        if self.paper_mode and 2 * self.d != self.n:
            raise ParameterError("paper_mode requires d = n/2")

    @classmethod
    def balanced(cls, kappa: int, count: int) -> "CosetParams":
        return cls(kappa, kappa // 2, count, paper_mode=True)


def coset_gen(params: CosetParams, randomness: RandomStream) -> tuple[CosetTriple, ...]:
    """Sample ``params.count`` coset triples, consuming the stream in a fixed order.

    Draw order per triple: subspace rows (rejection-sampled), then ``s``,
    then ``s'``. The order is part of the contract: the membership program
    and key generation must derive identical tuples from the same PRF output.
    """
    out = []
    for _ in range(params.count):
        a = sample_subspace(params.n, params.d, randomness)
        s = randomness.bits(params.n)
        s_prime = randomness.bits(params.n)
        out.append(CosetTriple(a, s, s_prime))
    return tuple(out)
