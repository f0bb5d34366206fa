"""Equal-mass transport partitions for prefixes of the dyadic digital sequence.

For ``N > b**2`` (``b = 2**d``) the unit cube is refined level by level into
rectangles ``R_u`` that track the dyadic cubes ``C_u`` but carry mass exactly
``M(u) / N``, where ``M(u)`` counts the prefix points in ``C_u``.  Each parent
is split by ``d`` successive axis cuts, axis ``k`` selected by bit ``k`` of the
child digit.  The refinement stops at level ``L - 2``; every terminal
rectangle is then sliced along axis 0 into ``M(u)`` slabs of volume ``1/N``,
and the slabs are handed to the points of ``C_u`` in index order.

For ``N <= b**2`` the cube is simply sliced into ``N`` slabs along axis 0.
"""

from __future__ import annotations

import gc
import operator
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from gmpy2 import mpq

from .geometry import (
    BigRational,
    Rect,
    as_rational,
    cut,
    disjoint,
    pairwise_disjoint_witness,
    unit_cube,
    volume,
)
from .sequence import (
    DigitWord,
    anchor_numerators,
    check_dim,
    prefix,
    residue_count,
)

THEOREM_CONSTANT = 6
OBLIVIOUS_LIMIT = 2000

__all__ = [
    "THEOREM_CONSTANT",
    "OBLIVIOUS_LIMIT",
    "DriftSchedule",
    "RectangleTree",
    "Cell",
    "TransportPartition",
    "CheckResult",
    "VerificationReport",
    "choose_level",
    "drift_schedule",
    "split_children",
    "build_rectangle_tree",
    "rectangle_partition",
    "terminal_slabs",
    "assign_points",
    "build_partition",
    "verify_partition",
    "verify_drift",
]


@contextmanager
def _gc_paused():
    # large acyclic allocations otherwise trigger repeated full collections
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def choose_level(N: int, d: int) -> int:
    """Smallest ``L >= 0`` with ``(2**d)**L >= N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    check_dim(d)
    # b**L >= N  <=>  d*L >= bit_length(N - 1)
    return -(-(N - 1).bit_length() // d)


@dataclass(frozen=True)
class DriftSchedule:
    """Per-level cut budgets ``delta``, running sums ``S`` and minimal side lengths ``sigma``.

    ``delta[l] = 2**(2d-3) * 2**(l(d-1)) / N`` for ``0 <= l <= L-3``,
    ``S[0] = 0``, ``S[l+1] = S[l] + delta[l]`` and ``sigma[l] = 2**-l - 2 S[l]``.
    """

    d: int
    N: int
    L: int
    delta: tuple
    S: tuple
    sigma: tuple

    def checks(self) -> list["CheckResult"]:
        two_L = mpq(1, 1 << self.L)
        out = [
            CheckResult(
                "drift.S_terminal",
                self.S[-1] <= 2 * two_L,
                detail=f"S_(L-2)={self.S[-1]} vs 2*2^-L={2 * two_L}",
            )
        ]
        bad_sigma = [
            l for l, s in enumerate(self.sigma) if s < mpq(3, 4) * mpq(1, 1 << l)
        ]
        out.append(
            CheckResult("drift.sigma", not bad_sigma, bad_sigma[0] if bad_sigma else None)
        )
        bad_delta = [
            l for l, (dl, s) in enumerate(zip(self.delta, self.sigma)) if dl > s / 6
        ]
        out.append(
            CheckResult("drift.delta", not bad_delta, bad_delta[0] if bad_delta else None)
        )
        # |y - x_n| <= sqrt(d) (S_(L-2) + 2^-(L-2)) < 6 sqrt(d) 2^-L, compared without the sqrt(d)
        combined = self.S[-1] + 4 * two_L
        out.append(
            CheckResult(
                "drift.radius_strict",
                combined < 6 * two_L,
                detail=f"S_(L-2)+2^-(L-2)={combined} vs 6*2^-L={6 * two_L}",
            )
        )
        return out


def drift_schedule(N: int, d: int) -> DriftSchedule:
    check_dim(d)
    b = 1 << d
    if N <= b * b:
        raise ValueError(f"a drift schedule needs N > b^2 = {b * b}")
    L = choose_level(N, d)
    base = mpq(1 << (2 * d - 3), N)
    delta = tuple(base * (1 << (l * (d - 1))) for l in range(L - 2))
    S = [mpq(0)]
    for dl in delta:
        S.append(S[-1] + dl)
    sigma = tuple(mpq(1, 1 << l) - 2 * S[l] for l in range(L - 2))
    return DriftSchedule(d, N, L, delta, tuple(S), sigma)


def _split(R: Rect, counts: Sequence[int], N: int, d: int):
    """Cut ``R`` into ``2**d`` children; return them (indexed by digit) and the largest midpoint shift."""
    b = 1 << d
    parts = {0: R}
    worst = mpq(0)
    for k in range(d):
        step = 1 << k
        nxt = {}
        for p, rect in parts.items():
            # children below this node share the low k bits p; bit k = 0 goes left
            m0 = sum(counts[v] for v in range(p, b, 2 * step))
            left, right, t = cut(rect, k, mpq(m0, N))
            shift = abs(t - (rect.lo[k] + rect.hi[k]) / 2)
            if shift > worst:
                worst = shift
            nxt[p] = left
            nxt[p + step] = right
        parts = nxt
    return [parts[v] for v in range(b)], worst


def split_children(u: DigitWord, R_u: Rect, counts, N: int) -> list[Rect]:
    """Split ``R_u`` into the ``b`` child rectangles ``R_{u*v}`` of volume ``counts[v] / N``.

    ``counts`` is a sequence or mapping indexed by the child digit ``v``.
    """
    d = u.d
    b = 1 << d
    if isinstance(counts, Mapping):
        counts = [counts[v] for v in range(b)]
    counts = [int(c) for c in counts]
    if len(counts) != b:
        raise ValueError(f"expected {b} child counts")
    if min(counts) < 1:
        raise ValueError("every child count must be >= 1")
    if volume(R_u) != mpq(sum(counts), N):
        raise ValueError("parent volume does not equal M(u)/N")
    return _split(R_u, counts, N, d)[0]


@dataclass
class RectangleTree:
    """All rectangles ``R_u`` for levels ``0..L-2``, keyed by the residue ``r_u``.

    ``max_shift[l]`` is the largest ``|t - midpoint|`` among the cuts made at level ``l``.
    """

    d: int
    N: int
    L: int
    levels: list
    max_shift: list

    @property
    def terminal(self) -> dict:
        return self.levels[-1]

    def word(self, r: int, level: int) -> DigitWord:
        return DigitWord.from_residue(r, level, self.d)


def build_rectangle_tree(N: int, d: int) -> RectangleTree:
    check_dim(d)
    b = 1 << d
    if N <= b * b:
        raise ValueError(f"the rectangle partition needs N > b^2 = {b * b}")
    L = choose_level(N, d)
    levels = [{0: unit_cube(d)}]
    max_shift = []
    for l in range(L - 2):
        mod = b**l
        child_mod = mod * b
        nxt = {}
        worst = mpq(0)
        for r, R in levels[-1].items():
            counts = [residue_count(N, r + v * mod, child_mod) for v in range(b)]
            children, shift = _split(R, counts, N, d)
            if shift > worst:
                worst = shift
            for v, C in enumerate(children):
                nxt[r + v * mod] = C
        levels.append(nxt)
        max_shift.append(worst)
    return RectangleTree(d, N, L, levels, max_shift)


def rectangle_partition(N: int, d: int) -> dict[DigitWord, Rect]:
    """The level-``(L-2)`` rectangles, keyed by word."""
    tree = build_rectangle_tree(N, d)
    h = tree.L - 2
    return {tree.word(r, h): R for r, R in tree.terminal.items()}


def terminal_slabs(R_u: Rect, M: int, N: int) -> list[Rect]:
    """Slice ``R_u`` (of volume ``M/N``) along axis 0 into ``M`` slabs of volume ``1/N``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if volume(R_u) != mpq(M, N):
        raise ValueError(f"volume {volume(R_u)} != {M}/{N}")
    if M == 1:
        return [R_u]
    cross = mpq(1)
    for a, b in zip(R_u.lo[1:], R_u.hi[1:]):
        cross *= b - a
    width = 1 / (N * cross)
    a0 = R_u.lo[0]
    s = [a0 + r * width for r in range(M)] + [R_u.hi[0]]
    lo_rest, hi_rest = R_u.lo[1:], R_u.hi[1:]
    return [Rect.trusted((s[r],) + lo_rest, (s[r + 1],) + hi_rest) for r in range(M)]


def assign_points(slabs: Mapping, points: Mapping) -> dict[int, Rect]:
    """Pair the point indices of each word with its slabs.

    Within a word, indices in ascending order meet slabs in ascending order of
    their axis-0 position.
    """
    out = {}
    for key, idx in points.items():
        rects = sorted(slabs.get(key, ()), key=lambda R: R.lo[0])
        idx = sorted(idx)
        if len(rects) != len(idx):
            raise ValueError(
                f"word {key!r}: {len(idx)} points but {len(rects)} slabs"
            )
        out.update(zip(idx, rects))
    if len(out) != sum(len(v) for v in slabs.values()):
        raise ValueError("slabs left unassigned")
    return out


class Cell(NamedTuple):
    n: int
    point: tuple
    rect: Rect


@dataclass
class TransportPartition:
    """``N`` cells ``A_1..A_N`` with ``|A_n| = 1/N``, cell ``n`` attached to ``x_n``."""

    d: int
    N: int
    L: int
    fallback: bool
    cells: list
    tree: RectangleTree | None = field(default=None, repr=False, compare=False)

    def cell(self, n: int) -> Cell:
        return self.cells[n - 1]


def _fallback_cells(N: int, d: int, points) -> list[Cell]:
    rest_lo = (mpq(0),) * (d - 1)
    rest_hi = (mpq(1),) * (d - 1)
    return [
        Cell(
            n,
            points[n - 1].coords,
            Rect.trusted((mpq(n - 1, N),) + rest_lo, (mpq(n, N),) + rest_hi),
        )
        for n in range(1, N + 1)
    ]


def build_partition(N: int, d: int) -> TransportPartition:
    """Build the equal-mass partition attached to the first ``N`` points."""
    with _gc_paused():
        return _build_partition(N, d)


def _build_partition(N: int, d: int) -> TransportPartition:
    check_dim(d)
    if N < 1:
        raise ValueError("N must be >= 1")
    b = 1 << d
    L = choose_level(N, d)
    points = prefix(N, d)
    if N <= b * b:
        return TransportPartition(d, N, L, True, _fallback_cells(N, d, points))

    tree = build_rectangle_tree(N, d)
    h = L - 2
    mod = b**h
    slabs = {}
    owners = {}
    for r, R in tree.terminal.items():
        slabs[r] = terminal_slabs(R, residue_count(N, r, mod), N)
        owners[r] = range(r + 1, N + 1, mod)
    rects = assign_points(slabs, owners)
    cells = [Cell(n, points[n - 1].coords, rects[n]) for n in range(1, N + 1)]
    return TransportPartition(d, N, L, False, cells, tree)


# --- verification -----------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: object = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}"
        if self.witness is not None and not self.passed:
            text += f" witness={self.witness}"
        if self.detail:
            text += f" ({self.detail})"
        return text


@dataclass
class VerificationReport:
    mode: str
    checks: list
    radius_sq: BigRational | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def _bbox(rects) -> Rect:
    rects = list(rects)
    lo = tuple(map(min, zip(*(R.lo for R in rects))))
    hi = tuple(map(max, zip(*(R.hi for R in rects))))
    if all(map(operator.lt, lo, hi)):
        return Rect.trusted(lo, hi)
    return Rect(lo, hi, degenerate=True)


def _float_view(cells):
    """Float copies of the boxes, with a margin far above the conversion error.

    Each rational converts with relative error at most ``2**-53``, so any
    float comparison that clears the margin decides the exact comparison too.
    """
    lo = np.array([[float(v) for v in c.rect.lo] for c in cells])
    hi = np.array([[float(v) for v in c.rect.hi] for c in cells])
    scale = 1.0 + max(np.abs(lo).max(), np.abs(hi).max())
    return lo, hi, 1e-9 * scale


def _sweep_disjoint(cells, chunk: int = 2_000_000) -> tuple | None:
    """Exact overlap search pruned by axis-0 order; returns an overlapping ``(n, n')`` or ``None``.

    Candidate pairs are those whose axis-0 intervals may overlap.  Pairs
    that the float view shows separated on some axis are discarded; every
    remaining pair gets the exact rational test.
    """
    if len(cells) < 2:
        return None
    lo, hi, eps = _float_view(cells)
    perm = np.argsort(lo[:, 0], kind="stable")
    order = [cells[i] for i in perm.tolist()]
    lo, hi = lo[perm], hi[perm]
    ends = np.searchsorted(lo[:, 0], hi[:, 0] + eps, side="left")
    counts = np.maximum(ends - np.arange(len(order)) - 1, 0)
    start = 0
    while start < len(order):
        stop = start + 1
        total = counts[start]
        while stop < len(order) and total + counts[stop] <= chunk:
            total += counts[stop]
            stop += 1
        block = counts[start:stop]
        I = np.repeat(np.arange(start, stop), block)
        J = I + 1 + np.arange(len(I)) - np.repeat(np.cumsum(block) - block, block)
        separated = ((hi[I] + eps < lo[J]) | (hi[J] + eps < lo[I])).any(axis=1)
        for a, b in zip(I[~separated].tolist(), J[~separated].tolist()):
            if not disjoint(order[a].rect, order[b].rect):
                return tuple(sorted((order[a].n, order[b].n)))
        start = stop
    return None


def _tree_disjoint(P: TransportPartition, groups: dict, boxes: dict, h: int) -> bool:
    """Certify disjointness from the word hierarchy.

    Cells sharing a level-``h`` word must have pairwise disjoint axis-0
    intervals; at every level the bounding boxes of sibling words must be
    pairwise disjoint.  Returns ``False`` when this sufficient test is
    inconclusive.
    """
    b = 1 << P.d
    for cs in groups.values():
        order = sorted(cs, key=lambda c: c.rect.lo[0])
        for c1, c2 in zip(order, order[1:]):
            if c1.rect.hi[0] > c2.rect.lo[0]:
                return False
    for level in range(h, 0, -1):
        mod = b ** (level - 1)
        siblings = defaultdict(list)
        for r, box in boxes.items():
            siblings[r % mod].append(box)
        for sib in siblings.values():
            if pairwise_disjoint_witness(sib) is not None:
                return False
        boxes = {r: _bbox(sib) for r, sib in siblings.items()}
    return True


def _cell_measures(cells) -> tuple[list, list]:
    """Volume of each cell and its largest squared distance to its point, column by column.

    With ``a <= b`` the two offsets ``x - a`` and ``b - x`` sum to a
    non-negative number, so their maximum is the larger absolute offset.
    """
    if not cells:
        return [], []
    sub, mul, add = operator.sub, operator.mul, operator.add
    los = zip(*[c.rect.lo for c in cells])
    his = zip(*[c.rect.hi for c in cells])
    xs = zip(*[c.point for c in cells])
    vols = sq = None
    for lo, hi, x in zip(los, his, xs):
        w = list(map(sub, hi, lo))
        far = list(map(max, map(sub, x, lo), map(sub, hi, x)))
        far2 = list(map(mul, far, far))
        if vols is None:
            vols, sq = w, far2
        else:
            vols = list(map(mul, vols, w))
            sq = list(map(add, sq, far2))
    return vols, sq


def _radius_check(name: str, P: TransportPartition, sq_radii, c) -> CheckResult:
    # the within_radius decision with (c^2 d)^d / N^2 hoisted out of the loop
    c = as_rational(c)
    d = P.d
    rhs = mpq((c * c * d) ** d) / (P.N * P.N)
    bad = next((cell.n for cell, D2 in zip(P.cells, sq_radii) if D2**d > rhs), None)
    return CheckResult(name, bad is None, bad, detail=f"c = {c}")


def verify_partition(
    P: TransportPartition, mode: str = "auto", constant=THEOREM_CONSTANT
) -> VerificationReport:
    """Exactly check every property the construction promises.

    Parameters
    ----------
    P : TransportPartition
        Partition to check; only the cell records and ``(d, N, L, fallback)``
        are consulted, never the builder's internal tree.
    mode : {"auto", "tree", "oblivious"}
        Disjointness strategy.  ``"oblivious"`` compares all cell pairs whose
        axis-0 intervals overlap and ignores any structure; ``"tree"``
        certifies disjointness through the word hierarchy of the points and
        falls back to the oblivious search if that is inconclusive.
        ``"auto"`` picks oblivious for ``N <= 2000``.
    constant : rational
        Radius constant ``c`` in ``c * sqrt(d) * N**(-1/d)``.

    Returns
    -------
    VerificationReport
        One :class:`CheckResult` per property; failures carry a witness
        (a cell index or a pair of indices).
    """
    with _gc_paused():
        return _verify_partition(P, mode, constant)


def _verify_partition(P: TransportPartition, mode: str, constant) -> VerificationReport:
    if mode not in ("auto", "tree", "oblivious"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "auto":
        mode = "oblivious" if P.N <= OBLIVIOUS_LIMIT else "tree"
    d, N = P.d, P.N
    b = 1 << d
    checks = []

    L = choose_level(N, d)
    meta_ok = P.L == L and P.fallback == (N <= b * b) and len(P.cells) == N
    checks.append(
        CheckResult(
            "metadata", meta_ok, detail="" if meta_ok else f"expected L={L}, {N} cells"
        )
    )
    indices_ok = sorted(c.n for c in P.cells) == list(range(1, N + 1))
    checks.append(CheckResult("indices", indices_ok))
    if not (meta_ok and indices_ok):
        return VerificationReport(mode, checks)

    expected = prefix(N, d)
    bad = next((c.n for c in P.cells if tuple(c.point) != expected[c.n - 1].coords), None)
    checks.append(CheckResult("points", bad is None, bad))

    vols, sq_radii = _cell_measures(P.cells)
    target = mpq(1, N)
    bad = next((c.n for c, v in zip(P.cells, vols) if v != target), None)
    checks.append(CheckResult("volume", bad is None, bad, detail="each |A_n| = 1/N"))

    h = max(L - 2, 0) if not P.fallback else 0
    groups = defaultdict(list)
    mod = b**h
    for c in P.cells:
        groups[(c.n - 1) % mod].append(c)

    boxes = {r: _bbox(c.rect for c in cs) for r, cs in groups.items()}
    zero, one = mpq(0), mpq(1)
    whole = _bbox(boxes.values())
    outside = None
    if min(whole.lo) < zero or max(whole.hi) > one:
        outside = next(
            c.n for c in P.cells if min(c.rect.lo) < zero or max(c.rect.hi) > one
        )
    total = sum(vols, mpq(0))
    checks.append(
        CheckResult(
            "coverage",
            outside is None and total == 1,
            outside,
            detail=f"sum of volumes = {total}",
        )
    )

    certified = mode == "tree" and _tree_disjoint(P, groups, boxes, h)
    witness = None if certified else _sweep_disjoint(P.cells)
    checks.append(
        CheckResult(
            "disjoint",
            witness is None,
            witness,
            detail="word hierarchy" if certified else "pairwise sweep",
        )
    )

    checks.append(_radius_check("radius", P, sq_radii, THEOREM_CONSTANT))
    if constant != THEOREM_CONSTANT:
        checks.append(_radius_check(f"radius(c={constant})", P, sq_radii, constant))

    if not P.fallback:
        S = drift_schedule(N, d).S[-1]
        worst_word = None
        side = mpq(1, 1 << h)
        for r, box in boxes.items():
            anchors = anchor_numerators(r, h, d)
            for j in range(d):
                A = mpq(anchors[j], 1 << h)
                if abs(box.lo[j] - A) > S or abs(box.hi[j] - A - side) > S:
                    worst_word = r
                    break
            if worst_word is not None:
                break
        checks.append(
            CheckResult(
                "drift.endpoints",
                worst_word is None,
                None if worst_word is None else DigitWord.from_residue(worst_word, h, d).digits,
                detail=f"bound S_(L-2) = {S}",
            )
        )
    return VerificationReport(mode, checks, max(sq_radii))


def verify_drift(tree: RectangleTree) -> list[CheckResult]:
    """Check the drift schedule and the builder's rectangles at every level."""
    d, N = tree.d, tree.N
    b = 1 << d
    sched = drift_schedule(N, d)
    checks = sched.checks()

    bad = [l for l, s in enumerate(tree.max_shift) if s > sched.delta[l]]
    checks.append(
        CheckResult("drift.cut_midpoint", not bad, bad[0] if bad else None)
    )

    mass_bad = endpoint_bad = None
    for l, level in enumerate(tree.levels):
        mod = b**l
        side = mpq(1, 1 << l)
        S = sched.S[l]
        for r, R in level.items():
            if mass_bad is None and volume(R) != mpq(residue_count(N, r, mod), N):
                mass_bad = (l, r)
            if endpoint_bad is None:
                anchors = anchor_numerators(r, l, d)
                for j in range(d):
                    A = mpq(anchors[j], 1 << l)
                    if abs(R.lo[j] - A) > S or abs(R.hi[j] - A - side) > S:
                        endpoint_bad = (l, r)
                        break
    checks.append(CheckResult("drift.masses", mass_bad is None, mass_bad))
    checks.append(
        CheckResult("drift.endpoints_all_levels", endpoint_bad is None, endpoint_bad)
    )
    h = tree.L - 2
    mass_total = sum(residue_count(N, r, b**h) for r in tree.terminal)
    min_count = min(residue_count(N, r, b**h) for r in tree.terminal)
    checks.append(
        CheckResult(
            "drift.terminal_counts",
            mass_total == N and min_count >= b and len(tree.terminal) == b**h,
            detail=f"sum M(u) = {mass_total}, min M(u) = {min_count}",
        )
    )
    return checks
