"""Tests for the two-sided discrete annulus-modulus estimator."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juliacantor import corpus
from juliacantor.modulus import (
    DEFAULT_RESOLUTION,
    AnnulusEstimate,
    ModulusError,
    annulus_modulus,
    flux_energy,
    groetzsch_partials,
    groetzsch_sum,
    modulus_bracket,
    mu_series,
    nu_floor,
    potential_energy,
    round_annulus_modulus,
    round_labels,
    square_frame_modulus,
    superadditive_consistent,
    transfer_modulus,
)
from juliacantor.puzzle import PieceId, build_puzzle

TWO_PI = 2.0 * math.pi
FAST_RES = 96  # cheap grids for property sweeps; oracles use the default


def exact_round(r: float, R: float) -> float:
    return math.log(R / r) / TWO_PI


@pytest.fixture(scope="module")
def basilica_graph():
    entry = corpus.basilica_escape()
    return build_puzzle(entry.polynomial, entry.r0, 6)


class TestRoundOracle:
    def test_bracket_contains_truth(self):
        for r, R in [(1.0, 2.0), (0.5, 3.5), (2.0, 2.9)]:
            b = round_annulus_modulus(r, R, resolution=FAST_RES)
            assert b.lo <= exact_round(r, R) <= b.hi

    def test_default_resolution_within_two_percent(self):
        truth = exact_round(1.0, 2.0)
        b = round_annulus_modulus(1.0, 2.0)
        assert abs(b.mid - truth) < 0.02 * truth
        assert b.lo <= truth <= b.hi

    def test_wide_annulus_ring_decomposition(self):
        b = round_annulus_modulus(1.0, math.exp(TWO_PI))
        assert b.meta["rings"] > 1
        assert abs(b.mid - 1.0) < 0.02
        assert b.lo <= 1.0 <= b.hi

    def test_double_wide_and_concentric_additivity(self):
        mid_r = math.exp(TWO_PI)
        whole = round_annulus_modulus(1.0, mid_r**2)
        assert abs(whole.mid - 2.0) < 0.04
        first = round_annulus_modulus(1.0, mid_r)
        second = round_annulus_modulus(mid_r, mid_r**2)
        lo = first.lo + second.lo
        hi = first.hi + second.hi
        # concentric rounds add exactly, so the brackets must overlap
        assert max(lo, whole.lo) <= min(hi, whole.hi)

    def test_refinement_tightens_bracket(self):
        widths = []
        for res in (64, 128, 256):
            b = round_annulus_modulus(1.0, 2.0, resolution=res)
            widths.append(b.hi - b.lo)
        assert widths[0] > widths[1] > widths[2]

    @settings(max_examples=8, deadline=None)
    @given(
        scale=st.floats(0.5, 2.0),
        cx=st.floats(-0.3, 0.3),
        cy=st.floats(-0.3, 0.3),
    )
    def test_scale_translation_proxy(self, scale, cx, cy):
        base = round_annulus_modulus(1.0, 2.0, resolution=FAST_RES)
        moved = round_annulus_modulus(
            scale, 2.0 * scale, resolution=FAST_RES, center=complex(cx, cy)
        )
        assert max(base.lo, moved.lo) <= min(base.hi, moved.hi)


class TestSquareFrame:
    def test_matches_finer_grid_oracle(self):
        coarse = square_frame_modulus(0.5, 1.5, resolution=128)
        fine = square_frame_modulus(0.5, 1.5, resolution=512)
        half_c = 0.5 * (coarse.hi - coarse.lo)
        half_f = 0.5 * (fine.hi - fine.lo)
        assert abs(coarse.mid - fine.mid) <= half_c + half_f
        assert half_f < half_c


class TestTransfer:
    def test_scalar_law(self):
        assert transfer_modulus(1.0, 2) == 0.5
        nu = 0.173
        assert transfer_modulus(nu, 1) == nu
        with pytest.raises(ValueError):
            transfer_modulus(1.0, 0)

    def test_degree_two_cover_measured(self):
        image = round_annulus_modulus(1.2, 2.5, resolution=FAST_RES)
        pullback = round_annulus_modulus(
            math.sqrt(1.2), math.sqrt(2.5), resolution=FAST_RES
        )
        combined = 0.5 * (pullback.hi - pullback.lo) + 0.25 * (image.hi - image.lo)
        assert abs(pullback.mid - transfer_modulus(image.mid, 2)) <= combined


class TestEnergyBounds:
    def test_bracket_order(self):
        tight = round_labels(FAST_RES, 1.0, 2.0, "tight")
        loose = round_labels(FAST_RES, 1.0, 2.0, "loose")
        b = modulus_bracket(tight, loose, FAST_RES)
        assert 0 < b.lo <= b.hi

    def test_touching_plates_raise(self):
        labels = round_labels(32, 0.99, 1.0, "tight")
        with pytest.raises(ModulusError):
            potential_energy(labels)

    def test_flux_energy_positive(self):
        loose = round_labels(FAST_RES, 1.0, 2.0, "loose")
        assert flux_energy(loose) > 0

    @settings(max_examples=10, deadline=None)
    @given(
        r=st.floats(0.3, 1.5),
        ratio=st.floats(1.4, 4.0),
    )
    def test_truth_inside_bracket(self, r, ratio):
        R = r * ratio
        b = round_annulus_modulus(r, R, resolution=FAST_RES)
        assert b.lo <= exact_round(r, R) <= b.hi


class TestGraphAnnuli:
    def test_estimate_shape_and_invariants(self, basilica_graph):
        est = annulus_modulus(basilica_graph, PieceId(0, 0), PieceId(1, 0), resolution=128)
        assert isinstance(est, AnnulusEstimate)
        assert est.modulus - est.error >= 0
        assert est.resolution > 0
        assert est.lower > 0

    def test_error_shrinks_with_resolution(self, basilica_graph):
        coarse = annulus_modulus(basilica_graph, PieceId(0, 0), PieceId(1, 0), resolution=96)
        fine = annulus_modulus(basilica_graph, PieceId(0, 0), PieceId(1, 0), resolution=192)
        assert fine.error < coarse.error

    def test_rejects_non_nested_pieces(self, basilica_graph):
        with pytest.raises(ValueError):
            annulus_modulus(basilica_graph, PieceId(1, 0), PieceId(0, 0))
        stranger = int(basilica_graph.children_indices(1, 1)[0])
        with pytest.raises(ValueError):
            annulus_modulus(basilica_graph, PieceId(1, 0), PieceId(2, stranger))

    def test_too_thin_raises_without_refinement(self, basilica_graph):
        child = int(basilica_graph.children_indices(4, 0)[0])
        with pytest.raises(ModulusError):
            annulus_modulus(
                basilica_graph, PieceId(4, 0), PieceId(5, child), resolution=4, max_refinements=0
            )

    def test_refinement_resolves_deep_pair(self, basilica_graph):
        child = int(basilica_graph.children_indices(4, 0)[0])
        est = annulus_modulus(basilica_graph, PieceId(4, 0), PieceId(5, child), resolution=32)
        assert est.lower > 0
        assert est.refinements >= 1

    def test_nu_floor_positive_and_stable(self, basilica_graph):
        coarse = nu_floor(basilica_graph, 0, resolution=128)
        fine = nu_floor(basilica_graph, 0, resolution=256)
        assert coarse > 0
        # refinement can only sharpen the certified floor
        assert fine >= coarse
        assert nu_floor(basilica_graph, 1, resolution=128) > 0

    def test_nu_floor_saturated_band_raises(self, basilica_graph):
        # at depth 3 -> 4 the raster uncertainty bands of parent and
        # child collide, which no local refinement can separate
        with pytest.raises(ModulusError):
            nu_floor(basilica_graph, 3, resolution=128)


class TestGroetzsch:
    def test_partials_monotone(self):
        bounds = [round_annulus_modulus(1.0, 1.8, resolution=FAST_RES)] * 3
        partials = groetzsch_partials(bounds)
        assert partials == sorted(partials)
        assert partials[-1] == pytest.approx(3 * max(bounds[0].lo, 0.0))

    def test_sum_over_graph_chain(self, basilica_graph):
        first = annulus_modulus(basilica_graph, PieceId(0, 0), PieceId(1, 0), resolution=128)
        child = int(basilica_graph.children_indices(1, 0)[0])
        second = annulus_modulus(basilica_graph, PieceId(1, 0), PieceId(2, child), resolution=128)
        total = groetzsch_sum([first, second], basilica_graph)
        assert total == pytest.approx(first.lower + second.lower)
        assert groetzsch_sum([], basilica_graph) == 0.0

    def test_sum_rejects_overlap(self, basilica_graph):
        first = annulus_modulus(basilica_graph, PieceId(0, 0), PieceId(1, 0), resolution=128)
        child = int(basilica_graph.children_indices(1, 0)[0])
        second = annulus_modulus(basilica_graph, PieceId(1, 0), PieceId(2, child), resolution=128)
        with pytest.raises(ModulusError):
            groetzsch_sum([second, first], basilica_graph)

    def test_superadditivity_on_nested_rounds(self):
        whole = round_annulus_modulus(1.0, 4.0, resolution=FAST_RES)
        parts = [
            round_annulus_modulus(1.0, 1.9, resolution=FAST_RES),
            round_annulus_modulus(2.1, 4.0, resolution=FAST_RES),
        ]
        assert superadditive_consistent(whole, parts)
        assert exact_round(1.0, 4.0) >= sum(max(p.lo, 0.0) for p in parts)
