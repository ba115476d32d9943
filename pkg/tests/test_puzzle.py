"""Tests for the puzzle graph builder.

Invariant categories
--------------------
1. Piece counts per depth against frozen corpus expectations.
2. Fiber degree sums: covering degrees over each image fiber add to d.
3. Graph coherence: parent/children duality, image wiring, critical
   tracking, diameter monotonicity along parent chains.
4. Point location: containment, f-compatibility, escape cutoffs.
5. Scale selection and build determinism.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from juliacantor.corpus import (
    CUBIC_R0,
    basilica_escape,
    landing_cubic,
    square,
    standard_entries,
)
from juliacantor.polynomials import critical_points, green
from juliacantor.puzzle import (
    PieceId,
    PuzzleError,
    build_puzzle,
    choose_r0,
    fiber_degree_check,
    piece_of,
)

UNIT_DEPTH = 10

angle_st = st.floats(min_value=0.0, max_value=2 * np.pi, allow_nan=False)
unit_st = st.floats(min_value=0.05, max_value=0.95, allow_nan=False)


@pytest.fixture(scope="module")
def basilica_graph():
    entry = basilica_escape()
    return build_puzzle(entry.polynomial, entry.r0, UNIT_DEPTH)


@pytest.fixture(scope="module")
def landing_graph():
    entry = landing_cubic()
    return build_puzzle(entry.polynomial, entry.r0, UNIT_DEPTH)


class TestScaleSelection:
    def test_trivial_for_connected_square(self):
        choice = choose_r0(square().polynomial)
        assert choice.trivial
        assert choice.value == 1.0

    def test_sits_under_smallest_escaping_green(self):
        for entry in (basilica_escape(), landing_cubic()):
            choice = choose_r0(entry.polynomial)
            assert not choice.trivial
            assert 0 < choice.value < choice.floor
            escaping = [
                green(entry.polynomial, c.location, tol=1e-13).value
                for c in critical_points(entry.polynomial, budget=2048)
                if c.orbit_status == "escaping"
            ]
            assert choice.floor == pytest.approx(min(escaping), rel=1e-9)

    def test_frozen_cubic_scale_still_valid(self):
        choice = choose_r0(landing_cubic().polynomial)
        assert 0 < CUBIC_R0 < choice.floor


class TestPieceCounts:
    def test_square_single_piece_chain(self):
        entry = square()
        g = build_puzzle(entry.polynomial, 1.0, 12)
        got = [g.n_pieces(k) for k in range(13)]
        assert got == list(entry.piece_counts)

    def test_basilica_doubling(self, basilica_graph):
        expected = list(basilica_escape().piece_counts[: UNIT_DEPTH + 1])
        got = [basilica_graph.n_pieces(k) for k in range(UNIT_DEPTH + 1)]
        assert got == expected

    def test_landing_cubic_counts(self, landing_graph):
        expected = list(landing_cubic().piece_counts[: UNIT_DEPTH + 1])
        got = [landing_graph.n_pieces(k) for k in range(UNIT_DEPTH + 1)]
        assert got == expected

    def test_count_law(self, landing_graph):
        """count_k = d count_{k-1} - sum(dyn_degree - 1) at every depth."""
        g = landing_graph
        d = g.polynomial.degree
        for k in range(1, g.depth + 1):
            lv = g.level(k)
            folds = int(np.sum(lv.dyn_degree - 1))
            assert lv.count == d * g.n_pieces(k - 1) - folds


class TestFiberSums:
    def test_corpus_fibers_clean(self, basilica_graph, landing_graph):
        assert fiber_degree_check(basilica_graph) == []
        assert fiber_degree_check(landing_graph) == []

    def test_fiber_indices_partition_level(self, landing_graph):
        g = landing_graph
        for k in range(1, g.depth + 1):
            seen = np.concatenate(
                [g.fiber_indices(k, q) for q in range(g.n_pieces(k - 1))]
            )
            assert np.array_equal(np.sort(seen), np.arange(g.n_pieces(k)))
            for q in range(g.n_pieces(k - 1)):
                fib = g.fiber_indices(k, q)
                assert np.array_equal(g.level(k).image[fib], np.full(fib.size, q))


class TestGraphCoherence:
    def test_children_parent_duality(self, landing_graph):
        g = landing_graph
        for k in range(g.depth):
            lv = g.level(k + 1)
            gathered = np.concatenate(
                [g.children_indices(k, i) for i in range(g.n_pieces(k))]
            )
            assert np.array_equal(np.sort(gathered), np.arange(lv.count))
            for i in range(g.n_pieces(k)):
                kids = g.children_indices(k, i)
                assert np.array_equal(lv.parent[kids], np.full(kids.size, i))

    def test_parent_image_square_commutes(self, landing_graph):
        """The image of the parent is the parent of the image."""
        g = landing_graph
        for k in range(2, g.depth + 1):
            lv = g.level(k)
            prev = g.level(k - 1)
            assert np.array_equal(prev.image[lv.parent], prev.parent[lv.image])

    def test_bounded_critical_tracked_to_full_depth(self, landing_graph):
        g = landing_graph
        (ci,) = [
            i for i, c in enumerate(g.criticals) if c.orbit_status == "bounded"
        ]
        for k in range(g.depth + 1):
            i = g.critical_piece_index(k, ci)
            assert i >= 0
            piece = g.piece(PieceId(k, i))
            assert ci in piece.criticals
            assert piece.dyn_degree == 2
            if k > 0:
                # critical nest: each critical piece sits in the previous one
                assert piece.parent.index == g.critical_piece_index(k - 1, ci)

    def test_diameters_shrink_along_critical_nest(self, landing_graph):
        g = landing_graph
        (ci,) = [
            i for i, c in enumerate(g.criticals) if c.orbit_status == "bounded"
        ]
        diams = [
            g.piece_diameter(k, g.critical_piece_index(k, ci))
            for k in range(g.depth + 1)
        ]
        assert diams[g.depth] < 0.25 * diams[4]
        assert diams[g.depth] < diams[0]

    def test_switch_depth_reached_and_algebraic_tail(self, landing_graph):
        g = landing_graph
        assert g.switch_depth is not None
        for k in range(g.switch_depth + 1, g.depth + 1):
            lv = g.level(k)
            assert lv.algebraic
            assert lv.center is not None and lv.center.shape == (lv.count,)
            assert (lv.rad[lv.rad >= 0] < 2 * g.piece_diameter(k, 0) + 1.0).all()
        with pytest.raises(PuzzleError):
            g.level(g.depth).mask(0)

    def test_deep_escape_time_consistency(self, landing_graph):
        """Iterating the image map k times from any depth-k piece reaches
        the single chain above the depth-0 puzzle."""
        g = landing_graph
        k = g.depth
        idx = np.arange(g.n_pieces(k))
        cur = idx
        for depth in range(k, 0, -1):
            cur = g.level(depth).image[cur]
            assert (cur >= 0).all()
            assert (cur < g.n_pieces(depth - 1)).all()


class TestPointLocation:
    def test_critical_points_land_in_marked_pieces(self, landing_graph):
        g = landing_graph
        for ci, c in enumerate(g.criticals):
            if c.orbit_status != "bounded":
                continue
            for k in range(g.depth + 1):
                assert g.locate_index(c.location, k) == g.critical_piece_index(k, ci)

    def test_escaping_point_leaves_at_green_depth(self, basilica_graph):
        g = basilica_graph
        z = 3.5 + 0.0j
        gz = green(g.polynomial, z, tol=1e-13)
        assert gz.value > 0
        for k in range(g.depth + 1):
            idx = g.locate_index(z, k)
            if g.threshold(k) < gz.value:
                assert idx == -1
            else:
                assert idx >= 0

    def test_beta_fixed_point_chain(self, basilica_graph):
        """z = 3 is fixed under z^2 - 6; its piece must be fixed under the
        image map at every depth."""
        g = basilica_graph
        prev = None
        for k in range(g.depth + 1):
            idx = g.locate_index(3.0 + 0.0j, k)
            assert idx >= 0
            if prev is not None:
                assert g.level(k).image[idx] == prev
                assert g.level(k).parent[idx] == prev
            prev = idx

    @given(theta=angle_st, s=unit_st)
    @settings(max_examples=40, deadline=None)
    def test_location_commutes_with_dynamics(self, landing_graph, theta, s):
        """parent(piece(z, k)) = piece(z, k-1) and image(piece(z, k)) =
        piece(f z, k-1) wherever z stays locatable."""
        g = landing_graph
        c = 1.0 + 0.0j  # bounded critical point: guarantees deep membership
        z = c + s * 0.02 * np.exp(1j * theta)
        try:
            idx = [g.locate_index(z, k) for k in (4, 5)]
        except PuzzleError:
            return
        if idx[1] < 0 or idx[0] < 0:
            return
        assert g.level(5).parent[idx[1]] == idx[0]
        fz = g.polynomial(z)
        try:
            fidx = g.locate_index(fz, 4)
        except PuzzleError:
            return
        if fidx >= 0:
            assert g.level(5).image[idx[1]] == fidx

    def test_piece_of_wraps_locate(self, basilica_graph):
        pid = piece_of(basilica_graph, 3.0 + 0.0j, 5)
        assert pid is not None and pid.depth == 5
        assert piece_of(basilica_graph, 100.0 + 0.0j, 0) is None


class TestDeterminism:
    def test_rebuild_identical(self):
        entry = basilica_escape()
        r0 = choose_r0(entry.polynomial).value
        g1 = build_puzzle(entry.polynomial, r0, 7)
        g2 = build_puzzle(entry.polynomial, r0, 7)
        assert g1.switch_depth == g2.switch_depth
        for k in range(8):
            a, b = g1.level(k), g2.level(k)
            assert a.count == b.count
            assert np.array_equal(a.parent, b.parent)
            assert np.array_equal(a.image, b.image)
            assert np.array_equal(a.dyn_degree, b.dyn_degree)
            assert a.crit_piece == b.crit_piece


class TestBuildErrors:
    def test_two_bounded_criticals_in_one_piece_rejected(self):
        # z^3 - 0.1 z holds both critical orbits near the attracting fixed
        # point at 0, so any depth-0 piece contains both of them
        from juliacantor.polynomials import Polynomial

        p = Polynomial.from_coefficients([0.0, -0.1, 0.0, 1.0])
        with pytest.raises(PuzzleError):
            build_puzzle(p, 1.0, 2)
