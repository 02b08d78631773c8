import math
import random
from fractions import Fraction

import pytest

from cosma_lab import (
    build_mmm_cdag,
    optimal_tile,
    sequential_lower_bound,
    validate_pebbling,
)
from cosma_lab.seqsched import (
    SeqSchedule,
    closed_form_io,
    closed_form_tile,
    emit_schedule,
    schedule_tiles_csv,
    schedule_to_pebbling,
    trace_io,
)


def exhaustive_best_tile(S):
    """Full enumeration of ab/(a+b) under ab + a + 1 <= S (test oracle)."""
    best = None
    best_ab = None
    for a in range(1, S):
        if (S - 1 - a) // a < 1:
            break
        for b in range(1, (S - 1 - a) // a + 1):
            rank = (Fraction(a * b, a + b), -a, -b)
            if best is None or rank > best:
                best, best_ab = rank, (a, b)
    return best_ab


class TestOptimalTile:
    def test_reference_memory_size(self):
        t = optimal_tile(10)
        assert (t.a, t.b) == (2, 3)
        assert t.a * t.b + t.a + 1 == 9 <= 10
        assert t.intensity == Fraction(6, 5)

    def test_smallest_usable(self):
        t = optimal_tile(4)
        assert (t.a, t.b) == (1, 2)
        assert t.a * t.b + t.a + 1 == 4

    def test_degenerate_flagged(self):
        t = optimal_tile(3)
        assert (t.a, t.b) == (1, 1) and t.degenerate

    def test_matches_exhaustive_sample(self):
        for S in list(range(4, 160)) + [331, 332, 500, 997]:
            t = optimal_tile(S)
            assert (t.a, t.b) == exhaustive_best_tile(S), S

    def test_asymptotic_ratio(self):
        t = optimal_tile(10**6)
        assert 0.99 <= t.a / math.sqrt(10**6) <= 1.0

    def test_closed_form_stays_below_root(self):
        for S in (10, 100, 1000, 10**6):
            a0, b0 = closed_form_tile(S)
            assert a0 < math.sqrt(S) and b0 < math.sqrt(S)

    def test_feasibility_always_holds(self):
        for S in range(4, 400):
            t = optimal_tile(S)
            assert t.a * t.b + t.a + 1 <= S


class TestEmitSchedule:
    def test_divisible_tiling(self):
        s = emit_schedule(4, 6, 8, 10)
        assert s.tile.a == 2 and s.tile.b == 3
        tiles = s.tiles()
        assert len(tiles) == 4
        assert all(r1 - r0 == 1 and c1 - c0 == 2 for (r0, r1), (c0, c1) in tiles)

    def test_single_cell(self):
        s = emit_schedule(1, 1, 1, 16)
        assert len(s.tiles()) == 1
        assert list(s.multiplications()) == [(1, 1, 1)]

    def test_clipped_tiling(self):
        s = emit_schedule(5, 7, 3, 10)
        assert len(s.tiles()) == math.ceil(5 / 2) * math.ceil(7 / 3) == 9
        assert sum(1 for _ in s.multiplications()) == 105

    def test_covers_every_multiplication_once(self):
        rng = random.Random(7)
        for _ in range(10):
            m, n, k = rng.randint(1, 6), rng.randint(1, 6), rng.randint(1, 5)
            S = rng.randint(4, 12)
            s = emit_schedule(m, n, k, S)
            seen = list(s.multiplications())
            expect = {(i, j, r)
                      for i in range(1, m + 1)
                      for j in range(1, n + 1)
                      for r in range(1, k + 1)}
            assert len(seen) == len(expect) and set(seen) == expect


class TestTraceIO:
    def test_reference_counts(self):
        s = emit_schedule(4, 6, 8, 10)
        assert trace_io(s, 10) == (160, 24)
        assert closed_form_io(s) == (160, 24)

    @pytest.mark.parametrize("k", [1, 3, 9])
    def test_rank1_chain(self, k):
        s = emit_schedule(1, 1, k, 4)
        assert trace_io(s, 4) == (2 * k, 1)

    def test_ratio_within_greedy_bound(self):
        m, n, k, S = 4, 6, 8, 10
        s = emit_schedule(m, n, k, S)
        loads, stores = trace_io(s, S)
        total = loads + stores
        lb = sequential_lower_bound(m, n, k, S)
        a, b = s.tile.a, s.tile.b
        assert total / lb <= math.sqrt(S) * (a + b) / (2 * a * b) + 1e-9

    def test_divisible_closed_form(self):
        # For dims divisible by the tile: total = mnk/rho + mn.
        s = emit_schedule(6, 6, 4, 10)
        loads, stores = trace_io(s, 10)
        rho = s.tile.intensity
        assert loads + stores == 6 * 6 * 4 / rho + 36

    def test_trace_equals_closed_form_randomized(self):
        rng = random.Random(3)
        for _ in range(20):
            m, n, k = rng.randint(1, 9), rng.randint(1, 9), rng.randint(1, 6)
            S = rng.randint(4, 20)
            s = emit_schedule(m, n, k, S)
            assert trace_io(s, S) == closed_form_io(s)

    def test_working_set_guard(self):
        s = emit_schedule(2, 2, 2, 4)
        with pytest.raises(AssertionError, match="exceeds capacity"):
            trace_io(s, 3)


class TestScheduleToPebbling:
    def test_minimal_move_list(self):
        moves = schedule_to_pebbling(emit_schedule(1, 1, 1, 4))
        assert [m.op.value for m in moves] == ["L", "L", "C", "S"]

    def test_small_square(self):
        s = emit_schedule(2, 2, 2, 7)
        g = build_mmm_cdag(2, 2, 2)
        tally = validate_pebbling(g, 7, schedule_to_pebbling(s))
        assert tally == trace_io(s, 7)

    def test_reference_case_exact(self):
        s = emit_schedule(4, 6, 8, 10)
        g = build_mmm_cdag(4, 6, 8)
        tally = validate_pebbling(g, 10, schedule_to_pebbling(s))
        assert tally == trace_io(s, 10) == (160, 24)

    def test_randomized_cross_validation(self):
        rng = random.Random(11)
        for _ in range(12):
            m, n, k = rng.randint(1, 4), rng.randint(1, 4), rng.randint(1, 4)
            S = rng.randint(3, 12)
            s = emit_schedule(m, n, k, S)
            g = build_mmm_cdag(m, n, k)
            assert validate_pebbling(g, S, schedule_to_pebbling(s)) == trace_io(s, S)

    def test_capacity_is_tight(self):
        # One word less than the tile working set must be rejected.
        s = emit_schedule(4, 6, 8, 10)
        g = build_mmm_cdag(4, 6, 8)
        cap = s.tile.a * s.tile.b + s.tile.a + 1
        moves = schedule_to_pebbling(s)
        validate_pebbling(g, cap, moves)
        with pytest.raises(Exception):
            validate_pebbling(g, cap - 1, moves)


def test_tiles_csv_format():
    text = schedule_tiles_csv(emit_schedule(4, 6, 8, 10))
    lines = text.strip().splitlines()
    assert lines[0] == "tile,i_first,i_last,j_first,j_last"
    assert lines[1] == "0,1,2,1,3"
    assert len(lines) == 5


def test_schedule_value_semantics():
    s1 = emit_schedule(4, 6, 8, 10)
    s2 = SeqSchedule(4, 6, 8, s1.tile)
    assert s1 == s2
