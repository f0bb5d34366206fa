"""Wasserstein bounds derived from transport partitions, plus independent numerical checks.

* :func:`winfty_upper` turns a verified partition into an exact certificate
  ``W_inf(mu_N, lambda_d) <= sqrt(radius_sq)``.
* :func:`volumetric_lower_winfty` is the covering bound ``(N omega_d)^(-1/d)``.
* :func:`winfty_oracle_grid` discretises Lebesgue measure on a ``g**d`` grid and
  solves the resulting bottleneck assignment exactly.
* :func:`w1_exact_1d`, :func:`winfty_exact_1d` and :func:`obstruction_scan`
  handle the one-dimensional case with exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import gmpy2
import numpy as np
from gmpy2 import mpq
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .geometry import BigRational, as_rational
from .partition import TransportPartition, build_partition, verify_partition
from .sequence import SequencePoint, van_der_corput

__all__ = [
    "CouplingCertificate",
    "BoundReport",
    "OracleBudgetError",
    "UnverifiedPartitionError",
    "ObstructionTable",
    "winfty_upper",
    "wp_upper",
    "volumetric_lower_winfty",
    "unit_ball_volume",
    "theorem_bound",
    "bound_report",
    "grid_bottleneck_sq",
    "winfty_oracle_grid",
    "w1_exact_1d",
    "winfty_exact_1d",
    "obstruction_scan",
    "sequence_1d_prefix",
    "MAX_ORACLE_PAIRS",
]

MAX_ORACLE_PAIRS = 10**6


class OracleBudgetError(ValueError):
    """The grid oracle instance has more point-cell pairs than allowed."""


class UnverifiedPartitionError(ValueError):
    """A bound was requested from a partition that failed verification."""


def _sqrt(q) -> float:
    with gmpy2.context(gmpy2.get_context(), precision=128):
        return float(gmpy2.sqrt(gmpy2.mpfr(q)))


def theorem_bound(N: int, d: int, c=6) -> float:
    """``c * sqrt(d) * N**(-1/d)`` as a float."""
    return float(c) * math.sqrt(d) * N ** (-1.0 / d)


@dataclass(frozen=True)
class CouplingCertificate:
    """Exact sup over cells of the largest squared cell-to-point distance.

    The coupling that moves each point's mass uniformly over its cell has
    ``ess sup |x - y| = sqrt(radius_sq)``, hence
    ``W_inf(mu_N, lambda_d) <= sqrt(radius_sq)``.
    ``theorem_power_bound`` is ``(36 d)^d / N^2``; the theorem radius holds
    iff ``radius_sq**d <= theorem_power_bound``.
    """

    N: int
    d: int
    radius_sq: BigRational
    theorem_power_bound: BigRational = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "theorem_power_bound", mpq((36 * self.d) ** self.d, self.N * self.N)
        )

    @property
    def radius(self) -> float:
        return _sqrt(self.radius_sq)

    @property
    def within_theorem(self) -> bool:
        return self.radius_sq**self.d <= self.theorem_power_bound

    @property
    def theorem_radius(self) -> float:
        return theorem_bound(self.N, self.d)

    def normalized(self) -> float:
        """``radius * N**(1/d)``."""
        return self.radius * self.N ** (1.0 / self.d)


def winfty_upper(P: TransportPartition, report=None) -> CouplingCertificate:
    """Certified ``W_inf`` upper bound from a partition.

    ``report`` may carry a previous :func:`verify_partition` result for ``P``;
    otherwise the partition is verified here.  Unverified partitions are refused.
    """
    if report is None:
        report = verify_partition(P)
    if not report.passed:
        failed = ", ".join(c.name for c in report.failures())
        raise UnverifiedPartitionError(f"partition failed verification: {failed}")
    return CouplingCertificate(P.N, P.d, report.radius_sq)


def _check_p(p) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def wp_upper(P: TransportPartition, p, report=None) -> float:
    """Upper bound on ``W_p`` for any ``p >= 1``; equal to the ``W_inf`` certificate since ``W_p <= W_inf``."""
    _check_p(p)
    return winfty_upper(P, report).radius


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def volumetric_lower_winfty(N: int, d: int) -> float:
    """``(N * omega_d)**(-1/d)``: ``N`` balls of radius ``r`` covering unit mass force ``N omega_d r^d >= 1``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return (N * unit_ball_volume(d)) ** (-1.0 / d)


@dataclass
class BoundReport:
    N: int
    d: int
    p: float
    upper: float
    lower: float
    theorem: float
    oracle_value: float | None = None
    oracle_error: float | None = None

    @property
    def consistent(self) -> bool:
        if self.lower > self.upper:
            return False
        if self.oracle_value is None:
            return True
        e = self.oracle_error
        return self.oracle_value - e <= self.upper and self.oracle_value + e >= self.lower


def bound_report(N: int, d: int, p=math.inf, g: int | None = None) -> BoundReport:
    """Build and verify the partition for ``(N, d)`` and collect every bound."""
    p = _check_p(p)
    P = build_partition(N, d)
    cert = winfty_upper(P)
    rep = BoundReport(N, d, p, cert.radius, volumetric_lower_winfty(N, d), cert.theorem_radius)
    if g is not None:
        rep.oracle_value, rep.oracle_error = winfty_oracle_grid([c.point for c in P.cells], g)
    return rep


# --- grid bottleneck oracle -------------------------------------------------


def _as_coords(pt) -> tuple:
    if isinstance(pt, SequencePoint):
        return pt.coords
    if isinstance(pt, (tuple, list)):
        return tuple(as_rational(v) for v in pt)
    return (as_rational(pt),)


def _scaled_sq_distances(points, g: int):
    """Integer squared distances (cells x points) after scaling coordinates by a common denominator."""
    coords = [_as_coords(p) for p in points]
    d = len(coords[0])
    if any(len(c) != d for c in coords):
        raise ValueError("points must share one dimension")
    den = reduce(math.lcm, (int(v.denominator) for c in coords for v in c), 2 * g)
    pts = np.array(
        [[int(v.numerator) * (den // int(v.denominator)) for v in c] for c in coords],
        dtype=object,
    )
    centers_1d = [(2 * i + 1) * (den // (2 * g)) for i in range(g)]
    grids = np.meshgrid(*([centers_1d] * d), indexing="ij")
    cells = np.stack([gr.ravel() for gr in grids], axis=1)
    small = d * den * den < 2**62
    dtype = np.int64 if small else object
    cells = cells.astype(dtype)
    pts = pts.astype(dtype)
    D2 = np.zeros((cells.shape[0], pts.shape[0]), dtype=dtype)
    for j in range(d):
        diff = cells[:, j : j + 1] - pts[None, :, j]
        D2 += diff * diff
    return D2, den


def _feasible(D2, threshold) -> bool:
    """Is there a transport plan using only pairs within ``threshold``?

    Masses are scaled to integers: every cell supplies ``N`` units and every
    point absorbs ``G`` units, so splitting a cell between points is allowed.
    When ``N`` divides ``G`` this is the capacitated assignment with
    ``G / N`` cells per point.
    """
    G, N = D2.shape
    mask = D2 <= threshold
    if not mask.any(axis=1).all() or (mask.sum(axis=0) * N < G).any():
        return False
    rows, cols = np.nonzero(mask)
    src, sink = 0, G + N + 1
    head = np.concatenate([np.full(G, src), rows + 1, np.arange(N) + G + 1])
    tail = np.concatenate([np.arange(G) + 1, cols + G + 1, np.full(N, sink)])
    cap = np.concatenate([np.full(G, N), np.full(len(rows), N), np.full(N, G)]).astype(np.int32)
    graph = csr_matrix((cap, (head, tail)), shape=(G + N + 2, G + N + 2))
    return maximum_flow(graph, src, sink).flow_value == G * N


def grid_bottleneck_sq(
    points, g: int, max_pairs: int = MAX_ORACLE_PAIRS, strict: bool = False
) -> BigRational:
    """Exact squared ``W_inf`` between the uniform measure on ``g**d`` cell centres and the points.

    The answer is the smallest candidate squared distance at which a
    transport plan supported on pairs within that distance exists, found by
    binary search over the sorted distinct candidates with a max-flow test at
    each probe.  With ``strict=True``, ``g**d`` must be a multiple of ``N``
    (each point then receives exactly ``g**d / N`` whole cells).
    """
    points = list(points)
    N = len(points)
    if N == 0:
        raise ValueError("need at least one point")
    if g < 1:
        raise ValueError("g must be >= 1")
    d = len(_as_coords(points[0]))
    G = g**d
    if strict and G % N:
        raise ValueError(f"g^d = {G} is not divisible by N = {N}")
    if N * G > max_pairs:
        raise OracleBudgetError(f"N * g^d = {N * G} exceeds the budget {max_pairs}")
    D2, den = _scaled_sq_distances(points, g)
    cands = np.unique(D2)
    # every cell needs some partner, so the answer is at least the largest nearest-point distance
    lo = int(np.searchsorted(cands, D2.min(axis=1).max()))
    hi = len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(D2, cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return mpq(int(cands[lo]), den * den)


def winfty_oracle_grid(
    points, g: int, max_pairs: int = MAX_ORACLE_PAIRS, strict: bool = False
) -> tuple[float, float]:
    """Grid estimate of ``W_inf(mu_N, lambda_d)`` and its error band.

    Returns ``(value, error)`` with ``|W_inf - value| <= error = sqrt(d) / (2g)``,
    the largest distance from a point of a grid cell to its centre.
    """
    points = list(points)
    value_sq = grid_bottleneck_sq(points, g, max_pairs, strict)
    d = len(_as_coords(points[0]))
    return _sqrt(value_sq), math.sqrt(d) / (2 * g)


# --- one dimension ----------------------------------------------------------


def _sorted_unit_points(points) -> list:
    xs = [as_rational(x) for x in points]
    if not xs:
        raise ValueError("need at least one point")
    if any(a > b for a, b in zip(xs, xs[1:])):
        raise ValueError("points must be sorted")
    if xs[0] < 0 or xs[-1] >= 1:
        raise ValueError("points must lie in [0, 1)")
    return xs


def _w1_scaled(A, N: int, Q: int, D: int):
    """``2 D^2 * int_0^1 |F(x) - x| dx`` with breakpoints ``A`` (sorted, scaled by ``D = N Q``).

    On the ``i``-th piece the empirical CDF equals ``i/N``, i.e. ``i Q`` in
    scaled units, and ``int |c - x| dx`` has a closed form in the three cases
    ``c <= a``, ``c >= b`` and ``a < c < b``.
    """
    a = np.concatenate([[0], A])
    b = np.concatenate([A, [D]])
    c = np.arange(N + 1, dtype=a.dtype) * Q
    below = (b - c) ** 2 - (a - c) ** 2
    above = (c - a) ** 2 - (c - b) ** 2
    inside = (c - a) ** 2 + (b - c) ** 2
    return np.where(c <= a, below, np.where(c >= b, above, inside)).sum()


def w1_exact_1d(points) -> BigRational:
    """Exact ``W_1`` between the uniform measure on ``points`` and Lebesgue measure on ``[0, 1]``."""
    xs = _sorted_unit_points(points)
    N = len(xs)
    Q = reduce(math.lcm, (int(x.denominator) for x in xs), 1)
    D = N * Q
    dtype = np.int64 if 4 * D * D < 2**62 else object
    A = np.array([int(x.numerator) * (D // int(x.denominator)) for x in xs], dtype=dtype)
    total = _w1_scaled(A, N, Q, D)
    return mpq(int(total), 2 * D * D)


def winfty_exact_1d(points) -> BigRational:
    """Exact ``W_inf`` in one dimension: the ``i``-th smallest point serves the mass block ``[(i-1)/N, i/N]``."""
    xs = [as_rational(x) for x in points]
    if not xs:
        raise ValueError("need at least one point")
    if any(a > b for a, b in zip(xs, xs[1:])):
        raise ValueError("points must be sorted")
    N = len(xs)
    return max(
        max(abs(x - mpq(i, N)), abs(x - mpq(i + 1, N))) for i, x in enumerate(xs)
    )


@dataclass
class ObstructionTable:
    """``N * W_1`` for the one-dimensional sequence, with maxima per block ``[2^j, 2^(j+1))``."""

    values: list
    blocks: list

    def rows(self):
        """Pairs ``(N, N * W_1)`` for ``N = 1..N_max``."""
        return list(enumerate(self.values, start=1))


@dataclass(frozen=True)
class BlockMax:
    j: int
    start: int
    stop: int
    argmax: int
    value: BigRational


def obstruction_scan(N_max: int) -> ObstructionTable:
    """Exact ``N * W_1(mu_N, lambda_1)`` for ``N = 1..N_max`` along the ``d = 1`` sequence.

    The ``d = 1`` sequence is the base-2 van der Corput sequence, whose first
    ``N`` points all have denominator dividing ``2**K`` with
    ``K = bit_length(N_max - 1)``.
    """
    if N_max < 2:
        raise ValueError("N_max must be >= 2")
    K = (N_max - 1).bit_length()
    Q = 1 << K
    big = 4 * (N_max * Q) ** 2 >= 2**62
    dtype = object if big else np.int64
    m = np.arange(N_max, dtype=np.int64)
    # bit-reverse m on K bits
    nums = np.zeros(N_max, dtype=np.int64)
    for k in range(K):
        nums |= ((m >> k) & 1) << (K - 1 - k)
    nums = nums.astype(dtype)

    values = []
    xs = np.empty(0, dtype=dtype)
    for N in range(1, N_max + 1):
        x = nums[N - 1]
        xs = np.insert(xs, np.searchsorted(xs, x), x)
        total = _w1_scaled(xs * N, N, Q, N * Q)
        # N * total / (2 N^2 Q^2)
        values.append(mpq(int(total), 2 * N * Q * Q))

    blocks = []
    j = 0
    while (1 << j) <= N_max:
        start, stop = 1 << j, min(1 << (j + 1), N_max + 1)
        best = max(range(start, stop), key=lambda n: values[n - 1])
        blocks.append(BlockMax(j, start, stop, best, values[best - 1]))
        j += 1
    return ObstructionTable(values, blocks)


def sequence_1d_prefix(N: int) -> list:
    """Sorted first ``N`` points of the one-dimensional sequence."""
    return sorted(van_der_corput(n) for n in range(1, N + 1))
