import dataclasses

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import in_half_open
from dyadic_transport.geometry import Rect, contains, cut, disjoint, unit_cube, volume, within_radius
from dyadic_transport.io import partition_to_dict
from dyadic_transport.partition import (
    Cell,
    TransportPartition,
    assign_points,
    build_partition,
    build_rectangle_tree,
    choose_level,
    drift_schedule,
    rectangle_partition,
    split_children,
    terminal_slabs,
    verify_drift,
    verify_partition,
)
from dyadic_transport.sequence import DigitWord, count_in_cube, cube_rect, prefix, word_of

Q = mpq


class TestLevel:
    def test_examples(self):
        assert choose_level(1, 2) == 0
        assert choose_level(17, 2) == 3
        assert choose_level(64, 2) == 3

    @given(st.integers(1, 10**9), st.integers(2, 6))
    def test_minimal(self, N, d):
        L = choose_level(N, d)
        b = 2**d
        assert b**L >= N
        assert L == 0 or b ** (L - 1) < N

    def test_rejects(self):
        with pytest.raises(ValueError):
            choose_level(0, 2)
        with pytest.raises(ValueError):
            choose_level(5, 1)


class TestDriftSchedule:
    def test_n100(self):
        s = drift_schedule(100, 2)
        assert s.L == 4
        assert s.delta == (Q(1, 50), Q(1, 25))
        assert s.S[2] == Q(3, 50) <= Q(1, 8)

    def test_n65(self):
        # 4^3 = 64 < 65, so L = 4 and there are two budgets
        s = drift_schedule(65, 2)
        assert s.L == 4
        assert s.delta == (Q(2, 65), Q(4, 65))
        assert s.S == (0, Q(2, 65), Q(6, 65))

    def test_sigma(self):
        s = drift_schedule(100, 2)
        assert s.sigma == (1, Q(1, 2) - Q(2, 50))

    def test_requires_large_n(self):
        with pytest.raises(ValueError):
            drift_schedule(16, 2)

    @given(st.integers(2, 4).flatmap(lambda d: st.tuples(st.just(d), st.integers(4**d + 1, 10**9))))
    def test_inequalities(self, case):
        d, N = case
        s = drift_schedule(N, d)
        assert all(c.passed for c in s.checks()), [c.line() for c in s.checks()]


class TestSplit:
    def test_uniform_counts_give_dyadic_cubes(self):
        N = 4**3
        root = DigitWord((), 2)
        children = split_children(root, unit_cube(2), [16] * 4, N)
        for v, R in enumerate(children):
            C = cube_rect(root.child(v))
            assert (R.lo, R.hi) == (C.lo, C.hi)

    def test_first_cut(self):
        children = split_children(DigitWord((), 2), unit_cube(2), (2, 1, 1, 1), 5)
        # digits 0 and 2 have bit 0 clear and share the left part of the first cut
        assert children[0].hi[0] == Q(3, 5) == children[2].hi[0]
        assert children[1].lo[0] == Q(3, 5)
        assert [volume(R) for R in children] == [Q(2, 5), Q(1, 5), Q(1, 5), Q(1, 5)]

    def test_mapping_counts(self):
        a = split_children(DigitWord((), 2), unit_cube(2), {0: 2, 1: 1, 2: 1, 3: 1}, 5)
        b = split_children(DigitWord((), 2), unit_cube(2), (2, 1, 1, 1), 5)
        assert a == b

    def test_rejects_zero_count(self):
        with pytest.raises(ValueError):
            split_children(DigitWord((), 2), unit_cube(2), (2, 0, 2, 1), 5)

    def test_rejects_volume_mismatch(self):
        with pytest.raises(ValueError):
            split_children(DigitWord((), 2), unit_cube(2), (1, 1, 1, 1), 5)


class TestRectanglePartition:
    @pytest.mark.parametrize("L", [3, 4, 5])
    def test_powers_give_dyadic_cubes(self, L):
        N = 4**L
        rects = rectangle_partition(N, 2)
        assert len(rects) == 4 ** (L - 2)
        for u, R in rects.items():
            C = cube_rect(u)
            assert (R.lo, R.hi) == (C.lo, C.hi)
            assert count_in_cube(N, u) == 16

    def test_n100(self):
        rects = rectangle_partition(100, 2)
        assert len(rects) == 16 and all(u.level == 2 for u in rects)
        vols = [volume(R) for R in rects.values()]
        assert set(vols) <= {Q(6, 100), Q(7, 100)}
        assert sum(vols) == 1
        for u, R in rects.items():
            C = cube_rect(u)
            assert all(abs(a - b) <= Q(3, 50) for a, b in zip(R.lo + R.hi, C.lo + C.hi))

    @pytest.mark.parametrize("N, d", [(17, 2), (100, 2), (1000, 2), (65, 3), (5000, 3), (300, 4)])
    def test_tree_properties(self, N, d):
        tree = build_rectangle_tree(N, d)
        checks = verify_drift(tree)
        assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
        b = 2**d
        for level in tree.levels:
            rects = list(level.values())
            assert all(volume(R) > 0 for R in rects)
            assert sum(volume(R) for R in rects) == 1
            assert all(contains(unit_cube(d), R) for R in rects)
        for l, level in enumerate(tree.levels[:-1]):
            for r, R in level.items():
                kids = [tree.levels[l + 1][r + v * b**l] for v in range(b)]
                assert all(contains(R, K) for K in kids)
                assert all(disjoint(A, B) for i, A in enumerate(kids) for B in kids[i + 1 :])

    def test_cut_shifts_within_budget(self):
        tree = build_rectangle_tree(3000, 2)
        sched = drift_schedule(3000, 2)
        assert all(s <= dl for s, dl in zip(tree.max_shift, sched.delta))


class TestSlabs:
    def test_unit_square(self):
        slabs = terminal_slabs(unit_cube(2), 4, 4)
        assert [s.lo[0] for s in slabs] == [0, Q(1, 4), Q(1, 2), Q(3, 4)]
        assert all(s.hi[0] - s.lo[0] == Q(1, 4) for s in slabs)

    def test_cut_points(self):
        R = Rect((0, 0), (Q(3, 5), Q(1, 2)))
        slabs = terminal_slabs(R, 3, 10)
        assert [s.hi[0] for s in slabs[:-1]] == [Q(1, 5), Q(2, 5)]
        assert all(volume(s) == Q(1, 10) for s in slabs)
        assert slabs[-1].hi == R.hi

    def test_single(self):
        R = Rect((0, 0), (Q(1, 2), Q(1, 5)))
        assert terminal_slabs(R, 1, 10) == [R]

    def test_rejects_volume_mismatch(self):
        with pytest.raises(ValueError):
            terminal_slabs(unit_cube(2), 3, 4)


class TestAssign:
    def test_single_pair(self):
        S = unit_cube(2)
        assert assign_points({0: [S]}, {0: [1]}) == {1: S}

    def test_order_rule(self):
        left = Rect((0, 0), (Q(1, 2), 1))
        right = Rect((Q(1, 2), 0), (1, 1))
        assert assign_points({"u": [right, left]}, {"u": [7, 3]}) == {3: left, 7: right}

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            assign_points({0: [unit_cube(2)]}, {0: [1, 2]})


class TestBuild:
    def test_single_point(self):
        P = build_partition(1, 2)
        (c,) = P.cells
        assert c.n == 1 and c.point == (0, 0)
        assert (c.rect.lo, c.rect.hi) == ((0, 0), (1, 1))
        assert P.fallback

    def test_four_points_fallback(self):
        P = build_partition(4, 2)
        assert P.fallback and P.tree is None
        for n, c in enumerate(P.cells, start=1):
            assert c.rect.lo == (Q(n - 1, 4), 0) and c.rect.hi == (Q(n, 4), 1)

    def test_hundred(self):
        P = build_partition(100, 2)
        assert len(P.cells) == 100 and not P.fallback and P.L == 4
        for c in P.cells:
            assert volume(c.rect) == Q(1, 100)
            assert within_radius(c.rect, c.point, 6, 100, 2)

    @pytest.mark.parametrize("N, d", [(16, 2), (17, 2), (64, 3), (65, 3)])
    def test_fallback_boundary(self, N, d):
        assert build_partition(N, d).fallback == (N <= 4**d)

    def test_cells_follow_points(self):
        P = build_partition(500, 2)
        pts = prefix(500, 2)
        assert [c.point for c in P.cells] == [p.coords for p in pts]
        # every cell lies in the level-(L-2) rectangle of its point's word
        rects = rectangle_partition(500, 2)
        for c in P.cells:
            assert contains(rects[word_of(c.n, P.L - 2, 2)], c.rect)

    def test_index_order_meets_axis_order(self):
        P = build_partition(300, 2)
        mod = 4 ** (P.L - 2)
        for r in range(mod):
            group = [P.cell(n) for n in range(r + 1, 301, mod)]
            starts = [c.rect.lo[0] for c in group]
            assert starts == sorted(starts)

    def test_deterministic(self):
        assert partition_to_dict(build_partition(777, 3)) == partition_to_dict(build_partition(777, 3))

    def test_rejects(self):
        with pytest.raises(ValueError):
            build_partition(0, 2)
        with pytest.raises(ValueError):
            build_partition(5, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3000), st.integers(2, 3))
    def test_points_lie_in_cells_nearby(self, N, d):
        P = build_partition(N, d)
        for c in P.cells:
            assert within_radius(c.rect, c.point, 6, N, d)
            assert in_half_open(c.rect.lo, (0,) * d, (1,) * d)


def _replace_cell(P, n, rect):
    cells = list(P.cells)
    cells[n - 1] = Cell(n, cells[n - 1].point, rect)
    return TransportPartition(P.d, P.N, P.L, P.fallback, cells)


class TestVerify:
    def test_single(self):
        assert verify_partition(build_partition(1, 2)).passed

    @pytest.mark.parametrize("N", list(range(17, 4097, 97)) + [64, 256, 1024, 4096, 4095, 1025])
    def test_range(self, N):
        report = verify_partition(build_partition(N, 2))
        assert report.passed, report.lines()

    @pytest.mark.parametrize("mode", ["tree", "oblivious"])
    @pytest.mark.parametrize("N, d", [(3000, 2), (700, 3), (20, 2)])
    def test_modes_agree(self, N, d, mode):
        report = verify_partition(build_partition(N, d), mode=mode)
        assert report.passed and report.mode == mode

    def test_auto_mode(self):
        assert verify_partition(build_partition(2000, 2)).mode == "oblivious"
        assert verify_partition(build_partition(2001, 2)).mode == "tree"

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            verify_partition(build_partition(5, 2), mode="fast")

    @pytest.mark.parametrize("mode", ["tree", "oblivious"])
    def test_shrunk_cell(self, mode):
        P = build_partition(100, 2)
        n = 37
        R = P.cell(n).rect
        cross = R.hi[1] - R.lo[1]
        shrunk = R.replace_axis(0, R.lo[0], R.hi[0] - Q(1, 200) / cross)
        report = verify_partition(_replace_cell(P, n, shrunk), mode=mode)
        assert not report["volume"].passed and report["volume"].witness == n
        assert not report["coverage"].passed
        assert report["disjoint"].passed and report["radius"].passed

    @pytest.mark.parametrize("mode", ["tree", "oblivious"])
    def test_overlap_detected(self, mode):
        P = build_partition(3000, 2)
        a, b = P.cell(10), P.cell(11)
        # move cell 11 onto cell 10 keeping its volume
        moved = Rect(a.rect.lo, tuple(x + (hi - lo) for x, lo, hi in zip(a.rect.lo, b.rect.lo, b.rect.hi)))
        report = verify_partition(_replace_cell(P, 11, moved), mode=mode)
        assert not report["disjoint"].passed
        assert 10 in report["disjoint"].witness

    def test_outside_cube(self):
        P = build_partition(5, 2)
        R = P.cell(5).rect
        report = verify_partition(_replace_cell(P, 5, Rect((R.lo[0] + 1, R.lo[1]), (R.hi[0] + 1, R.hi[1]))))
        assert not report["coverage"].passed and report["coverage"].witness == 5

    def test_wrong_point(self):
        P = build_partition(50, 2)
        cells = list(P.cells)
        cells[3] = Cell(4, (Q(1, 3), Q(1, 3)), cells[3].rect)
        report = verify_partition(TransportPartition(2, 50, P.L, False, cells))
        assert not report["points"].passed and report["points"].witness == 4

    def test_radius_failure(self):
        # swap two far-apart cells: volumes and disjointness survive, radii do not
        P = build_partition(1000, 2)
        cells = list(P.cells)
        i, j = 0, 3
        cells[i], cells[j] = Cell(1, cells[i].point, cells[j].rect), Cell(4, cells[j].point, cells[i].rect)
        report = verify_partition(TransportPartition(2, 1000, P.L, False, cells))
        assert report["volume"].passed and report["disjoint"].passed
        assert not report["radius"].passed

    def test_metadata(self):
        P = build_partition(50, 2)
        bad = dataclasses.replace(P, L=P.L + 1)
        report = verify_partition(bad)
        assert not report.passed and not report["metadata"].passed

    def test_missing_cell(self):
        P = build_partition(50, 2)
        bad = TransportPartition(2, 50, P.L, False, P.cells[:-1])
        assert not verify_partition(bad).passed

    def test_extra_constant(self):
        P = build_partition(1000, 2)
        report = verify_partition(P, constant=Q(1, 10))
        assert report["radius"].passed
        assert not report[f"radius(c={Q(1, 10)})"].passed

    def test_radius_sq_is_exact_max(self):
        from dyadic_transport.geometry import max_sq_dist

        P = build_partition(400, 3)
        report = verify_partition(P)
        assert report.radius_sq == max(max_sq_dist(c.rect, c.point) for c in P.cells)

    def test_drift_endpoint_check(self):
        P = build_partition(1000, 2)
        assert verify_partition(P)["drift.endpoints"].passed
        assert "drift.endpoints" not in [c.name for c in verify_partition(build_partition(10, 2)).checks]

    def test_strict_radius(self):
        for N in (17, 100, 5000, 10**6):
            checks = {c.name: c for c in drift_schedule(N, 2).checks()}
            assert checks["drift.radius_strict"].passed

    def test_report_lines(self):
        lines = verify_partition(build_partition(100, 2)).lines()
        assert all(line.startswith("PASS") for line in lines)


def test_split_then_cut_consistency():
    # the first split cut is the plain geometry cut with the axis-0 mass
    left, _, t = cut(unit_cube(2), 0, Q(3, 5))
    kids = split_children(DigitWord((), 2), unit_cube(2), (2, 1, 1, 1), 5)
    assert kids[0].hi[0] == t == left.hi[0]
