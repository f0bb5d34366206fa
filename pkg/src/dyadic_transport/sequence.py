"""The dyadic digital sequence in ``[0, 1)^d`` and exact prefix counts in dyadic cubes.

With ``b = 2**d``, write ``n - 1 = sum_k a_k b**k`` in base ``b``.  Bit ``j`` of
digit ``a_k`` becomes binary digit ``k + 1`` of coordinate ``j`` of ``x_n``,
so coordinate ``j`` is ``sum_k eps_j(a_k) 2**-(k+1)``.  Bit 0 (the least
significant bit) of a digit feeds axis 0.

A word ``u = (u_0, ..., u_{l-1})`` addresses the level-``l`` dyadic cube whose
points are exactly those ``x_n`` with ``n - 1 ≡ r_u (mod b**l)``, where
``r_u = sum_k u_k b**k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from gmpy2 import mpq

from .geometry import BigRational, Rect

MAX_DIM = 16

__all__ = [
    "MAX_DIM",
    "SequencePoint",
    "DigitWord",
    "check_dim",
    "point",
    "prefix",
    "word_of",
    "count_in_cube",
    "residue_count",
    "cube_rect",
    "anchor_numerators",
    "van_der_corput",
]


def check_dim(d: int, minimum: int = 2) -> int:
    if isinstance(d, bool) or not isinstance(d, int):
        raise TypeError("d must be an integer")
    if d < minimum or d > MAX_DIM:
        raise ValueError(f"d must lie in [{minimum}, {MAX_DIM}], got {d}")
    return d


def _check_index(n: int, name: str = "n") -> int:
    if isinstance(n, bool) or not isinstance(n, int):
        raise TypeError(f"{name} must be an integer")
    if n < 1:
        raise ValueError(f"{name} must be >= 1, got {n}")
    return n


def anchor_numerators(m: int, level: int, d: int) -> list[int]:
    """Per-axis numerators over ``2**level`` of the first ``level`` base-``2**d`` digits of ``m``.

    This is the lower corner of the dyadic cube addressed by those digits.
    """
    mask = (1 << d) - 1
    nums = [0] * d
    for k in range(level):
        digit = (m >> (d * k)) & mask
        if digit:
            weight = 1 << (level - 1 - k)
            for j in range(d):
                if digit >> j & 1:
                    nums[j] += weight
    return nums


def _num_digits(m: int, d: int) -> int:
    return -(-m.bit_length() // d)


class SequencePoint(NamedTuple):
    """``x_n`` with its index; a named tuple because prefixes hold millions of them."""

    n: int
    coords: tuple

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.coords)


def point(n: int, d: int) -> SequencePoint:
    """Return ``x_n`` with exact dyadic coordinates.

    Examples
    --------
    >>> point(6, 2).coords
    (mpq(3,4), mpq(0,1))
    """
    _check_index(n)
    check_dim(d)
    return _point(n, d)


def _point(n: int, d: int) -> SequencePoint:
    m = n - 1
    K = _num_digits(m, d)
    den = 1 << K
    return SequencePoint(n, tuple(mpq(v, den) for v in anchor_numerators(m, K, d)))


def prefix(N: int, d: int) -> list[SequencePoint]:
    """The first ``N`` points ``x_1, ..., x_N``."""
    _check_index(N, "N")
    check_dim(d)
    K = _num_digits(N - 1, d)
    if d * K > 62:
        return [_point(n, d) for n in range(1, N + 1)]
    m = np.arange(N, dtype=np.int64)
    nums = np.zeros((d, N), dtype=np.int64)
    for k in range(K):
        for j in range(d):
            nums[j] |= ((m >> (d * k + j)) & 1) << (K - 1 - k)
    den = 1 << K
    # only den distinct values per axis; share the rational objects
    table = [mpq(v, den) for v in range(den)] if den <= 4 * N else None
    if table is None:
        cols = [[mpq(v, den) for v in row] for row in nums.tolist()]
    else:
        cols = [[table[v] for v in row] for row in nums.tolist()]
    return [SequencePoint(n + 1, c) for n, c in enumerate(zip(*cols))]


def van_der_corput(n: int) -> BigRational:
    """The ``d = 1`` analogue of ``x_n``: the binary digits of ``n - 1`` mirrored about the point."""
    m = _check_index(n) - 1
    K = m.bit_length()
    return mpq(anchor_numerators(m, K, 1)[0], 1 << K)


@dataclass(frozen=True, slots=True)
class DigitWord:
    """A word over ``{0, ..., 2**d - 1}`` addressing a dyadic cube of side ``2**-level``."""

    digits: tuple
    d: int

    def __post_init__(self):
        check_dim(self.d, minimum=1)
        digits = tuple(int(v) for v in self.digits)
        b = 1 << self.d
        if any(v < 0 or v >= b for v in digits):
            raise ValueError(f"digits must lie in [0, {b})")
        object.__setattr__(self, "digits", digits)

    @property
    def level(self) -> int:
        return len(self.digits)

    @property
    def base(self) -> int:
        return 1 << self.d

    @property
    def residue(self) -> int:
        """``r_u = sum_k u_k b**k``."""
        r = 0
        for k, v in enumerate(self.digits):
            r |= v << (self.d * k)
        return r

    @classmethod
    def from_residue(cls, r: int, level: int, d: int) -> "DigitWord":
        mask = (1 << d) - 1
        return cls(tuple((r >> (d * k)) & mask for k in range(level)), d)

    def child(self, v: int) -> "DigitWord":
        return DigitWord(self.digits + (v,), self.d)

    def parent(self) -> "DigitWord":
        if not self.digits:
            raise ValueError("the empty word has no parent")
        return DigitWord(self.digits[:-1], self.d)


def word_of(n: int, level: int, d: int) -> DigitWord:
    """The first ``level`` base-``2**d`` digits of ``n - 1``."""
    _check_index(n)
    if level < 0:
        raise ValueError("level must be >= 0")
    return DigitWord.from_residue(n - 1, level, d)


def residue_count(N: int, r: int, modulus: int) -> int:
    """``#{0 <= m < N : m ≡ r (mod modulus)}`` for ``0 <= r < modulus``."""
    if r > N - 1:
        return 0
    return (N - 1 - r) // modulus + 1


def count_in_cube(N: int, u: DigitWord) -> int:
    """Number of ``x_1, ..., x_N`` inside the cube addressed by ``u``, in ``O(level)`` time."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if N == 0:
        return 0
    return residue_count(N, u.residue, 1 << (u.d * u.level))


def cube_rect(u: DigitWord, d: int | None = None) -> Rect:
    """The half-open dyadic cube addressed by ``u``."""
    if d is not None and d != u.d:
        raise ValueError("word base does not match d")
    level = u.level
    den = 1 << level
    nums = anchor_numerators(u.residue, level, u.d)
    return Rect(
        tuple(mpq(a, den) for a in nums),
        tuple(mpq(a + 1, den) for a in nums),
    )
