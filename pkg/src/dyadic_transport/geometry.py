"""Exact half-open box arithmetic over arbitrary-precision rationals.

All quantities are :class:`gmpy2.mpq` values, which are always kept in lowest
terms with a positive denominator.  Axes are indexed from 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpq

BigRational = type(mpq(0))

__all__ = [
    "BigRational",
    "Rect",
    "as_rational",
    "unit_cube",
    "volume",
    "cut",
    "disjoint",
    "contains",
    "max_sq_dist",
    "within_radius",
    "half_sum_deviation",
]


def as_rational(x) -> BigRational:
    """Convert an int, Fraction, mpq or ``"p/q"`` string to an exact rational.

    Floats are rejected so that nothing inexact leaks into the geometry.
    """
    if isinstance(x, BigRational):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return mpq(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        return mpq(x)
    if isinstance(x, type(gmpy2.mpz(0))):
        return mpq(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


@dataclass(frozen=True, slots=True)
class Rect:
    """The half-open box ``prod_j [lo[j], hi[j])``."""

    lo: tuple
    hi: tuple
    degenerate: bool = False

    def __post_init__(self):
        lo = tuple(as_rational(v) for v in self.lo)
        hi = tuple(as_rational(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        for a, b in zip(lo, hi):
            if b < a or (b == a and not self.degenerate):
                raise ValueError(f"empty or inverted interval [{a}, {b})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def trusted(cls, lo: tuple, hi: tuple) -> "Rect":
        """Build from tuples of mpq already known to satisfy ``lo < hi``; skips validation."""
        R = object.__new__(cls)
        _SET_LO(R, lo)
        _SET_HI(R, hi)
        _SET_DEGENERATE(R, False)
        return R

    @property
    def dim(self) -> int:
        return len(self.lo)

    def widths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def volume(self) -> BigRational:
        return volume(self)

    def replace_axis(self, axis: int, a, b) -> "Rect":
        """Return a copy whose ``axis`` interval is ``[a, b)``."""
        lo = list(self.lo)
        hi = list(self.hi)
        lo[axis] = as_rational(a)
        hi[axis] = as_rational(b)
        if not lo[axis] < hi[axis]:
            raise ValueError(f"empty interval [{a}, {b})")
        return Rect.trusted(tuple(lo), tuple(hi))

    def contains_point(self, x: Sequence) -> bool:
        return all(a <= v < b for a, v, b in zip(self.lo, x, self.hi))


# slot setters, used by Rect.trusted to bypass the frozen __setattr__
_SET_LO = Rect.lo.__set__
_SET_HI = Rect.hi.__set__
_SET_DEGENERATE = Rect.degenerate.__set__


def unit_cube(d: int) -> Rect:
    return Rect((mpq(0),) * d, (mpq(1),) * d)


def volume(R: Rect) -> BigRational:
    v = mpq(1)
    for a, b in zip(R.lo, R.hi):
        v *= b - a
    return v


def _cross_section(R: Rect, axis: int) -> BigRational:
    area = mpq(1)
    for i, (a, b) in enumerate(zip(R.lo, R.hi)):
        if i != axis:
            area *= b - a
    return area


def cut(R: Rect, axis: int, V) -> tuple[Rect, Rect, BigRational]:
    """Split ``R`` by the hyperplane ``x[axis] = t`` so the left part has volume ``V``.

    Parameters
    ----------
    R : Rect
        Box to split.
    axis : int
        Coordinate orthogonal to the cutting hyperplane.
    V : rational
        Target volume of ``R ∩ {x[axis] < t}``; must satisfy ``0 < V < |R|``.

    Returns
    -------
    left, right, t
        ``left = R ∩ {x[axis] < t}`` and ``right = R ∩ {x[axis] >= t}``.
        The midpoint displacement obeys
        ``|t - mid| * area = |V - |R|/2|`` exactly.
    """
    V = as_rational(V)
    total = volume(R)
    if not 0 < V < total:
        raise ValueError(f"cut volume {V} not strictly inside (0, {total})")
    t = R.lo[axis] + V / _cross_section(R, axis)
    left = R.replace_axis(axis, R.lo[axis], t)
    right = R.replace_axis(axis, t, R.hi[axis])
    return left, right, t


def disjoint(R1: Rect, R2: Rect) -> bool:
    """True iff the half-open boxes do not intersect."""
    if R1.dim != R2.dim:
        raise ValueError("dimension mismatch")
    for a1, b1, a2, b2 in zip(R1.lo, R1.hi, R2.lo, R2.hi):
        # the last two cases cover empty (degenerate) boxes
        if b1 <= a2 or b2 <= a1 or b1 <= a1 or b2 <= a2:
            return True
    return False


def contains(outer: Rect, inner: Rect) -> bool:
    """True iff ``inner ⊆ outer``."""
    return all(
        a <= c and e <= b
        for a, b, c, e in zip(outer.lo, outer.hi, inner.lo, inner.hi)
    )


def max_sq_dist(R: Rect, x: Sequence) -> BigRational:
    """Largest squared distance from ``x`` to a point of the closure of ``R``."""
    total = mpq(0)
    for a, b, v in zip(R.lo, R.hi, x):
        far = max(abs(a - v), abs(b - v))
        total += far * far
    return total


def within_radius(R: Rect, x: Sequence, c, N: int, d: int) -> bool:
    """Decide ``R ⊆ closed ball(x, c * sqrt(d) * N**(-1/d))`` exactly.

    The comparison ``D² <= c² d N^(-2/d)`` is raised to the ``d``-th power,
    ``N² (D²)^d <= (c² d)^d``, so no roots are taken.
    """
    c = as_rational(c)
    if c <= 0:
        raise ValueError("c must be positive")
    D2 = max_sq_dist(R, x)
    return N * N * D2**d <= (c * c * d) ** d


def half_sum_deviation(counts: Sequence[int], subset: Iterable[int]) -> BigRational:
    """``|sum_{i in subset} c_i - (1/2) sum_i c_i|`` for an ``{m, m+1}``-valued list.

    ``subset`` holds 0-based indices and must have exactly half the length of
    ``counts``.  The result never exceeds ``len(counts) / 4``.
    """
    counts = [int(c) for c in counts]
    B = len(counts)
    if B == 0 or B % 2:
        raise ValueError("counts must have positive even length")
    if max(counts) - min(counts) > 1:
        raise ValueError("counts must take values in {m, m+1}")
    idx = set(subset)
    if len(idx) != B // 2 or not all(0 <= i < B for i in idx):
        raise ValueError("subset must be B/2 distinct valid indices")
    part = sum(counts[i] for i in idx)
    return abs(mpq(part) - mpq(sum(counts), 2))


def pairwise_disjoint_witness(rects: Sequence[Rect]):
    """Return the first overlapping index pair ``(i, j)`` or ``None`` (all pairs)."""
    for i, j in itertools.combinations(range(len(rects)), 2):
        if not disjoint(rects[i], rects[j]):
            return i, j
    return None
