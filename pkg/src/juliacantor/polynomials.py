"""Polynomial dynamics primitives: evaluation, critical points, escape
certificates and the Green (escape-rate) function.

Conventions used throughout the package:

* polynomial coefficients are stored constant term first, so
  ``coeffs[k]`` multiplies ``z**k``;
* the degree is at least 2 and the leading coefficient is nonzero;
* the Green function is normalised as ``G(z) = lim d^-n log+ |f^n(z)|``
  and satisfies ``G(f(z)) = d * G(z)``.

Coefficients may be given as numbers, ``(re, im)`` pairs or decimal
strings.  String coefficients are kept verbatim so that orbit segments
can later be recomputed in arbitrary precision; everything geometric
(grids, moduli, rendering) runs in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Polynomial",
    "CriticalPoint",
    "GreenValue",
    "evaluate",
    "critical_points",
    "escape_radius",
    "green",
    "green_batch",
    "bounded_critical_points",
]

# Radius beyond which iterates are treated as numerically escaped; the
# Green tail correction below this magnitude is smaller than any
# tolerance we ever request in double precision.
HUGE_MODULUS = 1e100

# Cluster radius for folding nearby roots of p' into one critical point
# of higher local degree.
CRITICAL_CLUSTER_RADIUS = 1e-6

_ABERTH_MAX_SWEEPS = 120
_ABERTH_TOL = 1e-13


def _coerce_coefficient(c) -> tuple[complex, str | None]:
    """Return ``(complex_value, text)`` for one coefficient spec.

    ``text`` is non-None only when the input carried more precision than
    a double (a decimal string), in which case it is preserved for the
    arbitrary-precision orbit path.
    """
    if isinstance(c, str):
        return complex(float(c), 0.0), c
    if isinstance(c, (tuple, list)):
        if len(c) != 2:
            raise ValueError("coefficient pair must have exactly two entries")
        re, im = c
        re_txt = re if isinstance(re, str) else None
        im_txt = im if isinstance(im, str) else None
        val = complex(float(re), float(im))
        if re_txt is not None or im_txt is not None:
            return val, f"({re},{im})"
        return val, None
    return complex(c), None


@dataclass(frozen=True)
class Polynomial:
    """Immutable polynomial with coefficients stored constant term first."""

    coeffs: tuple[complex, ...]
    coeff_texts: tuple[str | None, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.coeffs) < 3:
            raise ValueError("degree must be at least 2")
        if self.coeffs[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")
        if not self.coeff_texts:
            object.__setattr__(self, "coeff_texts", (None,) * len(self.coeffs))

    @classmethod
    def from_coefficients(cls, coefficients: Iterable) -> "Polynomial":
        vals, texts = [], []
        for c in coefficients:
            v, t = _coerce_coefficient(c)
            vals.append(v)
            texts.append(t)
        return cls(tuple(vals), tuple(texts))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @cached_property
    def coeff_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.complex128)

    @cached_property
    def derivative_coeffs(self) -> tuple[complex, ...]:
        return tuple(k * c for k, c in enumerate(self.coeffs) if k > 0)

    @cached_property
    def coefficient_sum_bound(self) -> float:
        """Sum of |a_i| over the non-leading coefficients."""
        return float(np.sum(np.abs(self.coeff_array[:-1])))

    def __call__(self, z):
        return evaluate(self, z)

    def label(self) -> str:
        parts = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            parts.append(f"({c.real:g}{c.imag:+g}j)z^{k}" if c.imag else f"({c.real:g})z^{k}")
        return " + ".join(parts) if parts else "0"

    # -- arbitrary precision support -------------------------------------

    def mp_coeffs(self, mp):
        """Coefficients as mpmath numbers under the given mp context."""
        out = []
        for val, txt in zip(self.coeffs, self.coeff_texts):
            if txt is None:
                out.append(mp.mpc(val))
            elif txt.startswith("("):
                re, im = txt[1:-1].split(",")
                out.append(mp.mpc(mp.mpf(re), mp.mpf(im)))
            else:
                out.append(mp.mpc(mp.mpf(txt)))
        return out


def evaluate(p: Polynomial, z):
    """Evaluate ``p`` at ``z`` (scalar or ndarray) by Horner's scheme."""
    if isinstance(z, np.ndarray):
        acc = np.full(z.shape, p.coeffs[-1], dtype=np.complex128)
        for c in p.coeffs[-2::-1]:
            acc *= z
            acc += c
        return acc
    acc = p.coeffs[-1]
    for c in p.coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def evaluate_derivative(p: Polynomial, z):
    dc = p.derivative_coeffs
    if isinstance(z, np.ndarray):
        acc = np.full(z.shape, dc[-1], dtype=np.complex128)
        for c in dc[-2::-1]:
            acc *= z
            acc += c
        return acc
    acc = dc[-1]
    for c in dc[-2::-1]:
        acc = acc * z + c
    return acc


@dataclass(frozen=True)
class CriticalPoint:
    """A critical point of the polynomial together with its orbit status.

    ``local_degree`` is the local covering degree of the map at the
    point (2 for a simple critical point).  ``orbit_status`` is one of
    ``"bounded"``, ``"escaping"`` or ``"undecided"``; boundedness is
    always relative to the iteration budget recorded in
    ``iterations_checked``.
    """

    location: complex
    local_degree: int
    orbit_status: str = "unknown"
    iterations_checked: int = 0
    escape_time: int | None = None


def _aberth_roots(coeffs: Sequence[complex]) -> np.ndarray:
    """All roots of the polynomial with the given coefficients
    (constant term first) by Aberth-Ehrlich simultaneous iteration.

    Deterministic: the initial configuration is a fixed spiral scaled to
    the root bound, so repeated runs give identical output.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    # strip trailing zero coefficients defensively
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    n = len(c) - 1
    if n == 0:
        return np.empty(0, dtype=np.complex128)
    if n == 1:
        return np.array([-c[0] / c[1]])
    monic = c / c[-1]
    radius = 1.0 + float(np.max(np.abs(monic[:-1])))
    k = np.arange(n)
    roots = radius * 0.6 * np.exp(2j * np.pi * (k / n + 0.37) + 0.05j * k)

    def horner_pair(x):
        pv = np.full(x.shape, monic[-1], dtype=np.complex128)
        dv = np.zeros(x.shape, dtype=np.complex128)
        for cc in monic[-2::-1]:
            dv = dv * x + pv
            pv = pv * x + cc
        return pv, dv

    for _ in range(_ABERTH_MAX_SWEEPS):
        pv, dv = horner_pair(roots)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = np.where(dv != 0, pv / dv, 0.0)
            diff = roots[:, None] - roots[None, :]
            np.fill_diagonal(diff, np.inf)
            repulse = np.sum(1.0 / diff, axis=1)
            denom = 1.0 - newton * repulse
            step = np.where(np.abs(denom) > 1e-300, newton / denom, newton)
        roots = roots - step
        if np.max(np.abs(step)) < _ABERTH_TOL * max(1.0, float(np.max(np.abs(roots)))):
            break
    return roots


def critical_points(p: Polynomial, budget: int = 0) -> list[CriticalPoint]:
    """Critical points of ``p`` with local degrees.

    Roots of ``p'`` are found by simultaneous iteration and folded into
    clusters of radius ``CRITICAL_CLUSTER_RADIUS``; a cluster of m roots
    yields one critical point of local degree m+1.  The local degrees
    always satisfy ``sum(local_degree - 1) == degree - 1``.

    When ``budget > 0`` the orbit status of each point is classified as
    by :func:`bounded_critical_points`.
    """
    roots = _aberth_roots(p.derivative_coeffs)
    order = np.lexsort((roots.imag.round(9), roots.real.round(9)))
    roots = roots[order]
    clusters: list[list[complex]] = []
    for r in roots:
        placed = False
        for cl in clusters:
            if abs(r - cl[0]) <= CRITICAL_CLUSTER_RADIUS:
                cl.append(r)
                placed = True
                break
        if not placed:
            clusters.append([r])
    pts = []
    for cl in clusters:
        loc = complex(np.mean(np.asarray(cl)))
        pts.append(CriticalPoint(location=loc, local_degree=len(cl) + 1))
    pts.sort(key=lambda q: (round(q.location.real, 9), round(q.location.imag, 9)))
    if budget > 0:
        pts = _classify_orbits(p, pts, budget)
    return pts


def escape_radius(p: Polynomial) -> float:
    """Radius R with the certificate |z| >= R  =>  |p(z)| >= 2 |z|.

    Derivation: for |z| >= max(1, (2 + S)/|a_d|) with S the sum of the
    non-leading coefficient moduli,

        |p(z)| >= |z|^(d-1) ( |a_d| |z| - S ) >= 2 |z|,

    so the modulus at least doubles every step and the orbit escapes.
    """
    a_d = abs(p.coeffs[-1])
    return max(1.0, (2.0 + p.coefficient_sum_bound) / a_d)


@dataclass(frozen=True)
class GreenValue:
    """Green function value with a certified absolute error bound.

    For non-escaping inputs ``value`` is 0 and ``abs_error`` is the
    a-priori bound ``d^-n * Gmax`` left after ``iterations`` steps
    inside the escape disk; ``escaped`` records which case occurred.
    """

    value: float
    abs_error: float
    iterations: int
    escaped: bool


def _green_sup_bound(p: Polynomial) -> float:
    """Crude upper bound for G on the closed escape disk."""
    R = escape_radius(p)
    a_d = abs(p.coeffs[-1])
    step = np.log(a_d + p.coefficient_sum_bound)
    return float(np.log(R) + max(step, 0.0) / (p.degree - 1) + 1.0)


def green(p: Polynomial, z: complex, tol: float = 1e-12, budget: int = 2048) -> GreenValue:
    """Green function of the filled-in set at ``z``.

    The orbit is iterated until it clears the escape radius; after that
    the telescoping correction

        G = d^-n log|z_n| + sum_k d^-(k+1) log( |z_{k+1}| / |z_k|^d )

    is accumulated until its certified tail bound drops below ``tol``.
    Points still inside the escape disk after ``budget`` iterations get
    value 0 with the remaining a-priori bound as ``abs_error``.
    """
    vals, errs, its, esc = green_batch(p, np.array([z], dtype=np.complex128), tol, budget)
    return GreenValue(float(vals[0]), float(errs[0]), int(its[0]), bool(esc[0]))


def green_batch(p: Polynomial, zs: np.ndarray, tol: float = 1e-12, budget: int = 2048):
    """Vectorised Green function over an array of points.

    Returns ``(values, abs_errors, iterations, escaped)`` aligned with
    ``zs``.  The error entries are certified bounds combining the
    truncated-tail estimate with a fixed double-precision allowance.
    """
    d = p.degree
    a_d = abs(p.coeffs[-1])
    S = p.coefficient_sum_bound
    R = escape_radius(p)
    gmax = _green_sup_bound(p)

    z = np.asarray(zs, dtype=np.complex128).ravel().copy()
    m = z.size
    value = np.zeros(m)
    err = np.zeros(m)
    iters = np.zeros(m, dtype=np.int64)
    escaped = np.zeros(m, dtype=bool)
    done = np.zeros(m, dtype=bool)
    # per-point scale d^-n applied to the next correction term
    scale = np.ones(m)
    n = 0
    dinv = 1.0 / d
    float_slack = 5e-14

    while not done.all() and n < budget:
        act = ~done
        za = z[act]
        absz = np.abs(za)
        esc_now = absz > R
        # points newly past the escape radius: seed the principal term
        idx = np.flatnonzero(act)
        newly = idx[esc_now & ~escaped[idx]]
        if newly.size:
            scale[newly] = dinv**n
            value[newly] = scale[newly] * np.log(np.abs(z[newly]))
            escaped[newly] = True
        # points far enough out that the remaining tail is below tol stop here
        out = idx[escaped[idx]]
        if out.size:
            zo = np.abs(z[out])
            safe = zo * a_d > 2.0 * S + 2.0
            tail = np.full(out.size, np.inf)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                ratio = S / np.maximum(a_d * zo - S, 1e-300)
                tail[safe] = (scale[out][safe] * dinv / (d - 1)) * np.log1p(ratio[safe])
            fin = tail < tol * 0.5
            if fin.any():
                sel = out[fin]
                err[sel] = tail[fin] + float_slack * (1.0 + np.abs(value[sel]))
                done[sel] = True
                iters[sel] = n
        act = ~done
        if not act.any():
            break
        za = z[act]
        # one iteration step; escaped points accumulate the correction term
        zn = evaluate(p, za)
        eza = escaped[act]
        if eza.any():
            prev = za[eza]
            nxt = zn[eza]
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                corr = np.log(np.abs(nxt)) - d * np.log(np.abs(prev))
            sub = np.flatnonzero(act)[eza]
            value[sub] += scale[sub] * dinv * corr
            scale[sub] *= dinv
            # cap the magnitude to dodge overflow; the tail bound at this
            # size is far below any tolerance, so the value is final
            big = np.abs(nxt) > HUGE_MODULUS
            if big.any():
                selb = sub[big]
                err[selb] = scale[selb] / (d - 1) * (S / (a_d * HUGE_MODULUS)) + float_slack * (
                    1.0 + np.abs(value[selb])
                )
                done[selb] = True
                iters[selb] = n + 1
        z[act] = zn
        n += 1

    # anything not done: either still mid-refinement (escaped, budget hit)
    # or never escaped
    left = ~done
    if left.any():
        sub = np.flatnonzero(left)
        esc_left = escaped[sub]
        sel = sub[esc_left]
        if sel.size:
            zo = np.maximum(np.abs(z[sel]), R)
            with np.errstate(divide="ignore"):
                ratio = S / np.maximum(a_d * zo - S, 1e-300)
            err[sel] = scale[sel] / (d - 1) * np.log1p(np.minimum(ratio, 1e30)) + float_slack * (
                1.0 + np.abs(value[sel])
            )
            iters[sel] = n
        sel0 = sub[~esc_left]
        if sel0.size:
            value[sel0] = 0.0
            err[sel0] = gmax * d ** (-float(n))
            iters[sel0] = n
    return value, err, iters, escaped


_MAX_ORBIT_DPS = 6000


def _float_orbit_scan(p: Polynomial, z0: complex, R: float, budget: int):
    """Forward orbit with first-order error propagation.  Escape and
    boundedness calls are made only while the accumulated roundoff keeps
    the comparison against R unambiguous.  String coefficients carry more
    precision than their float64 image, so that representation gap enters
    the per-step error as well.  Returns (status, step, log10-derivative
    rate) where status is escaping / bounded / unresolved."""
    z = complex(z0)
    e = 1e-15 * (abs(z) + 1.0)
    coeff_eps = 0.0
    if any(t is not None for t in p.coeff_texts):
        coeff_eps = 1.2e-16 * float(
            sum(abs(c) * R**i for i, c in enumerate(p.coeffs))
        )
    logdf = 0.0
    for k in range(budget):
        az = abs(z)
        if az - e > R:
            return "escaping", k, logdf / max(k, 1)
        if az + e > R:
            return "unresolved", k, logdf / max(k, 1)
        df = abs(evaluate_derivative(p, z))
        # rate feeds the precision ladder; clamp so the zero derivative at
        # the critical point itself cannot drag the estimate negative
        logdf += math.log10(min(max(df, 0.1), 1e30))
        z = evaluate(p, z)
        e = e * df + 2.3e-16 * (abs(z) + 1.0) + coeff_eps
    return "bounded", budget, logdf / budget


def _mp_horner(cs, z):
    acc = cs[-1]
    for c in cs[-2::-1]:
        acc = acc * z + c
    return acc


def _mp_orbit_scan(p: Polynomial, z0: complex, R: float, budget: int, dps: int, local_degree: int):
    """Error-propagated orbit scan in dps-digit arithmetic.  The critical
    location is re-polished against the exact coefficients first, since a
    double-precision seed would dominate the error budget.  Multiple
    critical points are roots of p' of multiplicity local_degree - 1."""
    import mpmath as mp

    with mp.workdps(dps):
        cs = p.mp_coeffs(mp)
        dcs = [k * c for k, c in enumerate(cs)][1:]
        ddcs = [k * c for k, c in enumerate(dcs)][1:]
        z = mp.mpc(z0)
        m = max(local_degree - 1, 1)
        for _ in range(80):
            dq = _mp_horner(ddcs, z)
            if dq == 0:
                break
            step = m * _mp_horner(dcs, z) / dq
            z = z - step
            if abs(step) < mp.mpf(10) ** (6 - dps) * (1 + abs(z)):
                break
        ulp = mp.mpf(10) ** (4 - dps)
        e = ulp * (abs(z) + 1)
        Rm = mp.mpf(R)
        for k in range(budget):
            az = abs(z)
            if az - e > Rm:
                return "escaping", k
            if az + e > Rm:
                return "unresolved", k
            df = abs(_mp_horner(dcs, z))
            z = _mp_horner(cs, z)
            e = e * df + ulp * (abs(z) + 1)
        return "bounded", budget


def _classify_orbits(p: Polynomial, pts: list[CriticalPoint], budget: int) -> list[CriticalPoint]:
    R = escape_radius(p)
    out = []
    for cp in pts:
        status, k, rate = _float_orbit_scan(p, cp.location, R, budget)
        esc_t = k if status == "escaping" else None
        it = budget if status == "bounded" else k
        if status == "unresolved":
            # roundoff drift outran the orbit before a certified call was
            # possible (typical for orbits landing on repelling cycles);
            # retry at a precision projected from the observed drift rate
            status = "undecided"
            need = int(max(rate, 0.05) * budget * 1.25) + 60
            for dps in (need, 2 * need + 60):
                if dps > _MAX_ORBIT_DPS:
                    break
                s2, k2 = _mp_orbit_scan(p, cp.location, R, budget, dps, cp.local_degree)
                if s2 != "unresolved":
                    status = s2
                    esc_t = k2 if s2 == "escaping" else None
                    it = budget if s2 == "bounded" else k2
                    break
        out.append(
            CriticalPoint(
                location=cp.location,
                local_degree=cp.local_degree,
                orbit_status=status,
                iterations_checked=it,
                escape_time=esc_t,
            )
        )
    return out


def bounded_critical_points(p: Polynomial, budget: int = 2048) -> list[CriticalPoint]:
    """Critical points whose orbit stayed inside the escape disk for the
    whole budget.  Escape is certified by the radius; boundedness is
    budget-relative and recorded as such on the returned points."""
    return [c for c in critical_points(p, budget=budget) if c.orbit_status == "bounded"]


# -- high precision orbits ----------------------------------------------


def mp_orbit(p: Polynomial, start, length: int, dps: int):
    """Forward orbit ``[z, f(z), ..., f^length(z)]`` of ``start`` in
    ``dps``-digit arithmetic.

    ``start`` may be a complex number, a decimal string or a pair of
    decimal strings.  The returned list holds mpmath complex numbers;
    the caller owns the precision policy (rule of thumb: about
    0.35 * length + 60 digits for orbits that stay near the filled set).
    """
    import mpmath

    with mpmath.workdps(dps):
        cs = p.mp_coeffs(mpmath.mp)
        if isinstance(start, (tuple, list)):
            z = mpmath.mpc(mpmath.mpf(start[0]), mpmath.mpf(start[1]))
        elif isinstance(start, str):
            z = mpmath.mpc(mpmath.mpf(start))
        else:
            z = mpmath.mpc(start)
        orbit = [z]
        for _ in range(length):
            acc = cs[-1]
            for c in cs[-2::-1]:
                acc = acc * z + c
            z = acc
            orbit.append(z)
        return orbit
