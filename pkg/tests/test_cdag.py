import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosma_lab import (
    CDAG,
    SizeCapError,
    XPartition,
    a_vertex,
    b_vertex,
    build_mmm_cdag,
    c_vertex,
    computational_intensity,
    dominator_set,
    intensity_io_bound,
    minimum_set,
    phi_a,
    phi_b,
    phi_c,
    sequential_lower_bound,
    validate_x_partition,
    x_partition_violation,
)
from cosma_lab.seqsched import emit_schedule, schedule_bricks


def brute_force_children(g: CDAG, vs):
    """Independent child scan: children recomputed from the update rule."""
    vs = set(vs)
    out = set()
    for v in vs:
        i, j, r = v.coords
        child = c_vertex(i, j, r + 1) if r < g.k else None
        if child is None or child not in vs:
            out.add(v)
    return out


def is_dominator(g: CDAG, vs, dom):
    """Path oracle: no input reaches vs without passing through dom."""
    vs = set(vs)
    dom = set(dom)
    seen = set()
    stack = [v for v in g.inputs() if v not in dom]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        if v in vs:
            return False
        for child in g.children(v):
            if child not in dom and child not in seen:
                stack.append(child)
    return True


class TestConstruction:
    def test_smallest_instance(self):
        g = build_mmm_cdag(1, 1, 1)
        assert g.num_vertices == 3
        assert g.parents(c_vertex(1, 1, 1)) == (a_vertex(1, 1), b_vertex(1, 1))
        assert list(g.outputs()) == [c_vertex(1, 1, 1)]

    def test_chain_rule(self):
        g = build_mmm_cdag(2, 2, 2)
        assert g.num_vertices == 4 + 4 + 8
        assert set(g.parents(c_vertex(1, 1, 2))) == {
            a_vertex(1, 2),
            b_vertex(2, 1),
            c_vertex(1, 1, 1),
        }

    def test_enumerated_counts_and_outputs(self):
        m, n, k = 3, 2, 4
        g = build_mmm_cdag(m, n, k)
        # Independent enumeration of the update rule.
        verts = set()
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                for r in range(1, k + 1):
                    verts.add(c_vertex(i, j, r))
                    verts.add(a_vertex(i, r))
                    verts.add(b_vertex(r, j))
        assert len(verts) == 12 + 8 + 24 == g.num_vertices
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                assert g.is_output(c_vertex(i, j, 4))
                assert not g.is_output(c_vertex(i, j, 3))

    def test_every_inner_c_has_one_child(self):
        g = build_mmm_cdag(3, 2, 4)
        for v in g.c_vertices():
            kids = g.children(v)
            assert len(kids) == (1 if v.coords[2] < 4 else 0)

    def test_size_cap(self):
        with pytest.raises(SizeCapError, match="100"):
            build_mmm_cdag(10, 10, 10, cap=100)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            build_mmm_cdag(0, 1, 1)


class TestDominatorSet:
    def test_first_layer_vertex(self):
        g = build_mmm_cdag(2, 2, 2)
        assert dominator_set(g, {c_vertex(1, 1, 1)}) == {a_vertex(1, 1), b_vertex(1, 1)}

    def test_chain_vertex(self):
        g = build_mmm_cdag(1, 1, 2)
        dom = dominator_set(g, {c_vertex(1, 1, 2)})
        assert dom == {a_vertex(1, 2), b_vertex(2, 1), c_vertex(1, 1, 1)}

    def test_first_layer_brick(self):
        g = build_mmm_cdag(3, 3, 2)
        brick = {c_vertex(i, j, 1) for i in (1, 2) for j in (1, 2)}
        dom = dominator_set(g, brick)
        assert len(dom) == 4  # 2 A + 2 B vertices, no C predecessors
        assert is_dominator(g, brick, dom)

    def test_inner_brick_matches_surface_formula(self):
        a, b, c = 2, 3, 2
        g = build_mmm_cdag(4, 4, 4)
        brick = {
            c_vertex(i, j, r)
            for i in range(1, a + 1)
            for j in range(1, b + 1)
            for r in range(2, 2 + c)
        }
        dom = dominator_set(g, brick)
        assert len(dom) == a * c + b * c + a * b
        assert is_dominator(g, brick, dom)

    def test_minimality_on_tiny_chain(self):
        # No 2-element dominator exists for the top of a 2-chain.
        g = build_mmm_cdag(1, 1, 2)
        target = {c_vertex(1, 1, 2)}
        dom = dominator_set(g, target)
        assert len(dom) == 3
        universe = [v for v in g.vertices() if v not in target]
        import itertools

        for size in (0, 1, 2):
            for cand in itertools.combinations(universe, size):
                assert not is_dominator(g, target, set(cand))

    def test_closure_property(self):
        g = build_mmm_cdag(2, 3, 2)
        vs = {c_vertex(2, 1, 2), c_vertex(1, 2, 1), c_vertex(2, 3, 2)}
        closed = dominator_set(g, vs) | vs
        for v in vs:
            assert all(u in closed for u in g.parents(v))

    def test_rejects_input_vertices(self):
        g = build_mmm_cdag(2, 2, 2)
        with pytest.raises(ValueError):
            dominator_set(g, {a_vertex(1, 1)})


class TestMinimumSet:
    def test_chain_pair(self):
        g = build_mmm_cdag(1, 1, 2)
        vs = {c_vertex(1, 1, 1), c_vertex(1, 1, 2)}
        assert minimum_set(g, vs) == {c_vertex(1, 1, 2)}

    def test_flat_brick_is_its_own_minimum(self):
        g = build_mmm_cdag(3, 3, 3)
        brick = {c_vertex(i, j, 2) for i in (1, 2) for j in (1, 2, 3)}
        assert minimum_set(g, brick) == frozenset(brick)

    @settings(max_examples=100, deadline=None)
    @given(
        st.sets(
            st.tuples(
                st.integers(1, 2), st.integers(1, 2), st.integers(1, 2)
            ),
            max_size=8,
        )
    )
    def test_matches_child_scan(self, coords):
        g = build_mmm_cdag(2, 2, 2)
        vs = {c_vertex(*t) for t in coords}
        assert minimum_set(g, vs) == brute_force_children(g, vs)


class TestXPartition:
    def test_single_subset_trivial(self):
        g = build_mmm_cdag(1, 1, 1)
        part = XPartition((frozenset({c_vertex(1, 1, 1)}),), bound=2)
        assert validate_x_partition(g, part)

    def test_overlap_rejected(self):
        g = build_mmm_cdag(1, 1, 2)
        v1 = frozenset({c_vertex(1, 1, 1), c_vertex(1, 1, 2)})
        v2 = frozenset({c_vertex(1, 1, 2)})
        part = XPartition((v1, v2), bound=9)
        assert "both contain" in x_partition_violation(g, part)

    def test_incomplete_cover_rejected(self):
        g = build_mmm_cdag(1, 1, 2)
        part = XPartition((frozenset({c_vertex(1, 1, 1)}),), bound=9)
        assert "cover" in x_partition_violation(g, part)

    def test_cycle_rejected(self):
        g = build_mmm_cdag(2, 1, 2)
        v1 = frozenset({c_vertex(1, 1, 1), c_vertex(2, 1, 2)})
        v2 = frozenset({c_vertex(2, 1, 1), c_vertex(1, 1, 2)})
        part = XPartition((v1, v2), bound=9)
        assert "cyclic" in x_partition_violation(g, part)

    def test_bound_violation_reported(self):
        g = build_mmm_cdag(2, 2, 1)
        part = XPartition((frozenset(g.c_vertices()),), bound=3)
        assert "Dom" in x_partition_violation(g, part)

    def test_schedule_bricks_form_valid_partition(self):
        m, n, k, S = 4, 6, 8, 10
        g = build_mmm_cdag(m, n, k)
        sched = emit_schedule(m, n, k, S)
        a, b = sched.tile.a, sched.tile.b
        part = XPartition(tuple(schedule_bricks(sched)), bound=a * b + a + b)
        assert x_partition_violation(g, part) is None


class TestIntensity:
    def test_unit(self):
        assert computational_intensity(8, 8, 0, 0) == 1

    def test_optimal_tile_intensity(self):
        # a=2, b=3 resident block: volume ab, dominator ab+a+b, reuse ab.
        assert computational_intensity(6, 11, 6, 0) == Fraction(6, 5)

    def test_outer_product_intensity(self):
        # a = b = sqrt(S), c = 1 with S = 16: rho = sqrt(S)/2 = 2.
        S = 16
        rho = computational_intensity(S, S + 2 * 4, S, 0)
        assert rho == 2

    def test_nonpositive_denominator(self):
        with pytest.raises(ValueError):
            computational_intensity(5, 4, 6, 1)

    def test_io_bound(self):
        assert intensity_io_bound(192, Fraction(6, 5)) == 160
        assert intensity_io_bound(7, Fraction(2, 1)) == 4


class TestLowerBound:
    def test_reference_case(self):
        lb = sequential_lower_bound(4, 6, 8, 10)
        assert lb == pytest.approx(2 * 192 / math.sqrt(10) + 24, abs=1e-9)
        assert lb == pytest.approx(145.43146215, abs=1e-6)

    def test_trivial(self):
        assert sequential_lower_bound(1, 1, 1, 4) == pytest.approx(2.0)

    @pytest.mark.parametrize("s", [2, 3, 5, 8])
    def test_square_all_in_memory(self, s):
        assert sequential_lower_bound(s, s, s, s * s) == pytest.approx(3 * s * s)

    def test_requires_minimal_memory(self):
        with pytest.raises(ValueError):
            sequential_lower_bound(2, 2, 2, 2)


@settings(max_examples=200, deadline=None)
@given(
    st.sets(
        st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)),
        max_size=27,
    )
)
def test_loomis_whitney_inequality(coords):
    vs = {c_vertex(*t) for t in coords}
    lhs = len(vs) ** 2
    rhs = len(phi_a(vs)) * len(phi_b(vs)) * len(phi_c(vs))
    assert lhs <= rhs
