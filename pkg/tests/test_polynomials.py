"""Tests for the polynomial layer: evaluation, critical points, escape
radius, and the certified Green's function."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from juliacantor.corpus import standard_entries
from juliacantor.polynomials import (
    CriticalPoint,
    Polynomial,
    critical_points,
    escape_radius,
    evaluate,
    evaluate_derivative,
    green,
    green_batch,
    mp_orbit,
)

GREEN_ABS_TOL = 1e-9
FUNC_EQ_REL_TOL = 1e-7

finite = dict(allow_nan=False, allow_infinity=False)


def _random_poly(data, max_degree=5):
    degree = data.draw(st.integers(min_value=2, max_value=max_degree))
    coeffs = [
        complex(
            data.draw(st.floats(min_value=-3, max_value=3, **finite)),
            data.draw(st.floats(min_value=-3, max_value=3, **finite)),
        )
        for _ in range(degree)
    ]
    return Polynomial.from_coefficients(coeffs + [1.0])


class TestPolynomialBasics:
    def test_degree_and_call(self):
        p = Polynomial.from_coefficients([1.0, 0.0, 2.0, 1.0])
        assert p.degree == 3
        assert p(2.0) == pytest.approx(1 + 2 * 4 + 8)

    def test_rejects_low_degree(self):
        with pytest.raises(ValueError):
            Polynomial.from_coefficients([1.0, 1.0])

    def test_string_coefficients_round_trip(self):
        import mpmath as mp

        p = Polynomial.from_coefficients(["0.25", -3.0, 0.0, 1.0])
        assert p.coeffs[0] == 0.25
        with mp.workdps(60):
            cs = p.mp_coeffs(mp.mp)
            assert cs[0] == mp.mpf("0.25")

    @given(data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_derivative_matches_difference_quotient(self, data):
        p = _random_poly(data)
        z = complex(
            data.draw(st.floats(min_value=-2, max_value=2, **finite)),
            data.draw(st.floats(min_value=-2, max_value=2, **finite)),
        )
        h = 1e-7
        approx = (evaluate(p, z + h) - evaluate(p, z - h)) / (2 * h)
        scale = 1.0 + abs(evaluate_derivative(p, z))
        assert abs(evaluate_derivative(p, z) - approx) / scale < 1e-5


class TestCriticalPoints:
    @given(data=st.data())
    @settings(max_examples=50, deadline=None)
    def test_multiplicities_sum_to_degree_minus_one(self, data):
        p = _random_poly(data)
        crits = critical_points(p, budget=64)
        assert sum(c.local_degree - 1 for c in crits) == p.degree - 1

    @given(data=st.data())
    @settings(max_examples=50, deadline=None)
    def test_critical_points_kill_derivative(self, data):
        p = _random_poly(data)
        for c in critical_points(p, budget=64):
            # scale by the derivative's own size near the point
            size = sum(abs(a) * (abs(c.location) + 1) ** k for k, a in enumerate(p.coeffs))
            assert abs(evaluate_derivative(p, c.location)) < 1e-8 * max(size, 1.0)

    def test_corpus_orbit_statuses(self):
        expected = {
            "square": {"bounded"},
            "basilica_escape": {"escaping"},
            "fixed_cubic": {"bounded", "escaping"},
            "golden_cubic": {"bounded", "escaping"},
            "swap_cubic": {"bounded", "escaping"},
            "recurrent_cubic": {"bounded", "escaping"},
            "landing_cubic": {"bounded", "escaping"},
        }
        for entry in standard_entries():
            statuses = {c.orbit_status for c in critical_points(entry.polynomial, budget=2048)}
            assert statuses == expected[entry.name], entry.name

    def test_degenerate_critical_cluster(self):
        # z^3 + 1 has a single critical point of local degree 3 at 0
        p = Polynomial.from_coefficients([1.0, 0.0, 0.0, 1.0])
        crits = critical_points(p, budget=64)
        assert len(crits) == 1
        assert crits[0].local_degree == 3
        assert abs(crits[0].location) < 1e-12


class TestEscapeRadius:
    @given(data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_orbit_grows_outside_radius(self, data):
        p = _random_poly(data)
        R = escape_radius(p)
        theta = data.draw(st.floats(min_value=0.0, max_value=6.283, **finite))
        rho = data.draw(st.floats(min_value=1.0001, max_value=3.0, **finite))
        z = rho * R * complex(np.cos(theta), np.sin(theta))
        assert abs(evaluate(p, z)) > abs(z)


class TestGreenFunction:
    def test_square_green_is_log_abs(self):
        """Frozen oracle: for z^2 the potential equals log|z| outside the
        closed unit disk."""
        p = Polynomial.from_coefficients([0.0, 0.0, 1.0])
        rng = np.random.default_rng(20240817)
        rho = np.exp(rng.uniform(np.log(1.05), np.log(40.0), size=200))
        ang = rng.uniform(0, 2 * np.pi, size=200)
        zs = rho * np.exp(1j * ang)
        for z in zs:
            gv = green(p, complex(z), tol=1e-12)
            assert gv.escaped
            assert abs(gv.value - np.log(abs(z))) < GREEN_ABS_TOL

    def test_square_green_inside_is_zero(self):
        p = Polynomial.from_coefficients([0.0, 0.0, 1.0])
        gv = green(p, 0.5 + 0.1j, tol=1e-12)
        assert not gv.escaped
        assert gv.value == 0.0

    def test_reported_error_bounds_truth_for_square(self):
        p = Polynomial.from_coefficients([0.0, 0.0, 1.0])
        for z in (1.2 + 0.3j, 3.0 - 2.0j, 0.2 + 1.1j, -5.0 + 0.0j):
            gv = green(p, z, tol=1e-10)
            if gv.escaped:
                assert abs(gv.value - np.log(abs(z))) <= gv.abs_error + 1e-15

    @given(data=st.data())
    @settings(max_examples=120, deadline=None)
    def test_functional_equation(self, data):
        """G(f(z)) = d G(z) for escaping points, to combined certified error."""
        p = _random_poly(data)
        R = escape_radius(p)
        theta = data.draw(st.floats(min_value=0.0, max_value=6.283, **finite))
        rho = data.draw(st.floats(min_value=1.05, max_value=4.0, **finite))
        z = rho * R * complex(np.cos(theta), np.sin(theta))
        g1 = green(p, z, tol=1e-12)
        g2 = green(p, evaluate(p, z), tol=1e-12)
        assert g1.escaped and g2.escaped
        rel = abs(g2.value - p.degree * g1.value) / max(abs(g2.value), 1e-30)
        assert rel < FUNC_EQ_REL_TOL

    def test_batch_agrees_with_scalar(self):
        p = Polynomial.from_coefficients([-6.0, 0.0, 1.0])
        rng = np.random.default_rng(7)
        zs = rng.uniform(-4, 4, size=64) + 1j * rng.uniform(-4, 4, size=64)
        vals, errs, iters, esc = green_batch(p, zs, tol=1e-11)
        for i, z in enumerate(zs):
            gv = green(p, complex(z), tol=1e-11)
            assert esc[i] == gv.escaped
            if gv.escaped:
                assert abs(vals[i] - gv.value) <= errs[i] + gv.abs_error

    def test_nonescaping_batch_error_shrinks_with_budget(self):
        p = Polynomial.from_coefficients([0.0, 0.0, 1.0])
        zs = np.array([0.3 + 0.1j, -0.2 + 0.4j])
        _, e1, _, esc1 = green_batch(p, zs, budget=64)
        _, e2, _, esc2 = green_batch(p, zs, budget=256)
        assert not esc1.any() and not esc2.any()
        assert (e2 < e1).all()


class TestMpOrbit:
    def test_matches_float_for_short_orbits(self):
        p = Polynomial.from_coefficients([-6.0, 0.0, 1.0])
        orbit = mp_orbit(p, 0.5 + 0.25j, 8, dps=40)
        z = 0.5 + 0.25j
        for w in orbit[1:]:
            z = evaluate(p, z)
            assert abs(complex(w) - z) < 1e-9 * max(1.0, abs(z))
