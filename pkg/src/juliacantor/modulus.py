"""Conformal modulus of annuli by two-sided discrete energy bounds.

An annulus is presented as a cell grid labelled inner / domain / outer.
Piecewise-linear finite elements on the right-triangle split of the
cells make the Dirichlet energy an exact sum of edge differences, so a
solved potential (0 on the hole, 1 outside) is an admissible competitor
for the continuous problem and 1/E(u) bounds the modulus from below,
while a unit-period flux function on a covering cell set bounds it from
above by E(v).  Solver residuals therefore only loosen the bracket,
never invalidate it; what must be conservative is the labelling.
Synthetic (round, square-frame) labels are conservative by exact
geometry; puzzle-piece labels inherit the certified raster of the
piece, so they are conservative relative to that raster's own
INSIDE / FRINGE classification.

Estimates are reported as value +- error with value the bracket
midpoint, so value - error is the certified lower bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .puzzle import PieceId

DOMAIN = 0
INNER = 1
OUTER = 2

# default cell resolution of the modulus bracket; chosen so a round
# annulus brackets its exact modulus within two percent
DEFAULT_RESOLUTION = 256

# direct sparse factorization up to this many free vertices, multigrid-
# preconditioned conjugate gradients beyond
_DIRECT_LIMIT = 420_000

_CG_TOL = 1e-9

# synthetic round annuli wider than this in log-radius are split into
# concentric rings measured separately; moduli of rings cut by
# concentric circles add exactly (the extremal metric restricts), so
# the summed bracket still contains the true modulus, while a single
# cartesian grid would drop the hole below one cell
_RING_MAX_LOG = 1.25

_MAX_REFINEMENTS = 3


class ModulusError(ValueError):
    """Raised when a label grid cannot support a modulus bracket."""


@dataclass(frozen=True)
class ModulusBound:
    """Two-sided bracket of one annulus modulus.

    ``lo`` comes from the potential problem and ``hi`` from the flux
    problem; both are rigorous for the labelled (conservative) annulus.
    """

    lo: float
    hi: float
    resolution: int
    refinements: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def rel_width(self) -> float:
        if self.mid <= 0:
            return float("inf")
        return (self.hi - self.lo) / self.mid

    def scaled(self, factor: float) -> "ModulusBound":
        return ModulusBound(
            self.lo * factor, self.hi * factor, self.resolution, self.refinements, dict(self.meta)
        )


@dataclass(frozen=True)
class AnnulusEstimate:
    """Reported modulus of the annulus between two nested pieces.

    ``modulus`` is the bracket midpoint and ``error`` its half width,
    so ``modulus - error`` is the certified lower bound (>= 0 for every
    resolved estimate).  A thin annulus that stays unresolved after
    refinement is reported with ``error = inf`` and ``modulus`` equal
    to the best lower bound instead of failing the pipeline.
    ``resolution`` is the cell size of the accepted grid.
    """

    outer: PieceId | None
    inner: PieceId | None
    modulus: float
    error: float
    resolution: float
    refinements: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def lower(self) -> float:
        if math.isinf(self.error):
            return self.modulus
        return self.modulus - self.error

    @property
    def upper(self) -> float:
        return self.modulus + self.error

    @property
    def resolved(self) -> bool:
        return math.isfinite(self.error)


def _estimate_from_bound(
    outer: PieceId | None, inner: PieceId | None, bound: ModulusBound, cell: float
) -> AnnulusEstimate:
    lo = max(bound.lo, 0.0)
    return AnnulusEstimate(
        outer,
        inner,
        0.5 * (lo + bound.hi),
        0.5 * (bound.hi - lo),
        cell,
        bound.refinements,
        dict(bound.meta),
    )


# ---------------------------------------------------------------------------
# edge assembly
# ---------------------------------------------------------------------------


def _edge_system(cells: np.ndarray):
    """Edge arrays of the P1 energy over the marked cells.

    Returns (i_idx, j_idx, weights) into the flattened (n+1)^2 vertex
    grid for horizontal and vertical edges of every marked cell; each
    cell contributes weight 1/2 to each of its four sides, so interior
    edges accumulate to 1.
    """
    n = cells.shape[0]
    stride = n + 1
    ci, cj = np.nonzero(cells)
    # corner vertex ids: a = bottom-left, b = bottom-right,
    # c = top-left, d = top-right (row-major, row = y)
    a = ci * stride + cj
    b = a + 1
    c = a + stride
    d = c + 1
    horiz = np.concatenate([np.stack([a, b], 1), np.stack([c, d], 1)])
    vert = np.concatenate([np.stack([a, c], 1), np.stack([b, d], 1)])
    return horiz, vert


def _accumulate(edges: np.ndarray, offsets: np.ndarray | None = None):
    """Merge duplicate edges, summing the per-cell 1/2 weights."""
    key = edges[:, 0].astype(np.int64) << 32 | edges[:, 1].astype(np.int64)
    order = np.argsort(key, kind="stable")
    key = key[order]
    uniq, start = np.unique(key, return_index=True)
    counts = np.diff(np.append(start, key.size))
    i = (uniq >> 32).astype(np.int64)
    j = (uniq & 0xFFFFFFFF).astype(np.int64)
    w = 0.5 * counts
    if offsets is None:
        return i, j, w, None
    off = offsets[order]
    first = off[start]
    # a physical edge shared by two cells carries one offset value
    if not np.all(np.add.reduceat(off, start) == first * counts):
        raise ModulusError("inconsistent cut offsets on shared edges")
    return i, j, w, first


def _energy(x: np.ndarray, i, j, w, delta=None) -> float:
    d = x[i] - x[j]
    if delta is not None:
        d = d - delta
    return float(np.sum(w * d * d))


def _solve_graph(i, j, w, fixed_idx, fixed_val, nverts, rhs_delta=None):
    """Minimize sum_e w (x_i - x_j - delta)^2 over the free vertices.

    Stationarity gives the weighted graph Laplacian; an edge with a
    fixed endpoint moves its contribution to the right-hand side.
    """
    delta = np.zeros(i.size) if rhs_delta is None else np.asarray(rhs_delta, dtype=float)
    x = np.zeros(nverts)
    fixed_mask = np.zeros(nverts, dtype=bool)
    fixed_mask[fixed_idx] = True
    x[fixed_idx] = fixed_val
    touched = np.zeros(nverts, dtype=bool)
    touched[i] = True
    touched[j] = True
    free_mask = touched & ~fixed_mask
    nfree = int(free_mask.sum())
    if nfree == 0:
        return x
    pos = -np.ones(nverts, dtype=np.int64)
    pos[free_mask] = np.arange(nfree)
    fi, fj = pos[i], pos[j]
    imask = fi >= 0
    jmask = fj >= 0
    both = imask & jmask
    rows = np.concatenate([fi[both], fj[both], fi[imask], fj[jmask]])
    cols = np.concatenate([fj[both], fi[both], fi[imask], fj[jmask]])
    vals = np.concatenate([-w[both], -w[both], w[imask], w[jmask]])
    b = np.zeros(nfree)
    np.add.at(b, fi[imask], (w * delta)[imask])
    np.add.at(b, fj[jmask], -(w * delta)[jmask])
    ifix = imask & ~jmask
    np.add.at(b, fi[ifix], w[ifix] * x[j[ifix]])
    jfix = jmask & ~imask
    np.add.at(b, fj[jfix], w[jfix] * x[i[jfix]])
    lap = sparse.csr_matrix((vals, (rows, cols)), shape=(nfree, nfree))
    ncomp, comp = connected_components(lap != 0, directed=False)
    sol = np.zeros(nfree)
    if ncomp > 1:
        # pin one vertex per floating component; the bracket stays
        # valid because the energy is evaluated on the vector itself
        pins = np.array([int(np.argmax(comp == k)) for k in range(ncomp)])
        keep = np.ones(nfree, dtype=bool)
        keep[pins] = False
        if keep.any():
            sol_k = _solve_spd(lap[keep][:, keep].tocsr(), b[keep])
            sol[keep] = sol_k
    else:
        sol = _solve_spd(lap, b)
    x[free_mask] = sol
    return x


def _solve_spd(lap: sparse.csr_matrix, b: np.ndarray) -> np.ndarray:
    n = lap.shape[0]
    if n <= _DIRECT_LIMIT:
        return splu(lap.tocsc()).solve(b)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(lap.tocsr(), max_coarse=500)
    # an unconverged iterate still yields a valid (looser) bracket
    return ml.solve(b, tol=_CG_TOL, accel="cg", maxiter=400)


# ---------------------------------------------------------------------------
# the two variational problems
# ---------------------------------------------------------------------------


def _vertex_flags(labels: np.ndarray, value: int) -> np.ndarray:
    n = labels.shape[0]
    flag = np.zeros((n + 1, n + 1), dtype=bool)
    hit = labels == value
    flag[:-1, :-1] |= hit
    flag[:-1, 1:] |= hit
    flag[1:, :-1] |= hit
    flag[1:, 1:] |= hit
    return flag


def potential_energy(labels: np.ndarray) -> float:
    """Dirichlet energy of the solved potential: 0 on hole vertices, 1 on
    outer vertices, harmonic on the domain cells.

    1/potential_energy is a lower bound for the modulus of any annulus
    whose hole is covered by the INNER cells and whose complement is
    covered by the OUTER cells.
    """
    n = labels.shape[0]
    inner_v = _vertex_flags(labels, INNER)
    outer_v = _vertex_flags(labels, OUTER)
    if not inner_v.any() or not outer_v.any():
        raise ModulusError("annulus needs both inner and outer cells")
    if (inner_v & outer_v).any():
        raise ModulusError("annulus too thin: inner and outer cells touch")
    horiz, vert = _edge_system(labels == DOMAIN)
    edges = np.concatenate([horiz, vert])
    i, j, w, _ = _accumulate(edges)
    fixed_idx = np.concatenate([np.flatnonzero(inner_v.ravel()), np.flatnonzero(outer_v.ravel())])
    fixed_val = np.concatenate(
        [np.zeros(int(inner_v.sum())), np.ones(int(outer_v.sum()))]
    )
    x = _solve_graph(i, j, w, fixed_idx, fixed_val, (n + 1) * (n + 1))
    e = _energy(x, i, j, w)
    if e <= 0:
        raise ModulusError("potential problem degenerate: plates not connected by domain cells")
    return e


def _cut_offsets(labels: np.ndarray, vert_edges: np.ndarray) -> np.ndarray:
    """Per-edge jump for the flux problem: a horizontal ray from the
    hole centroid to the right edge of the grid, crossing vertical
    edges of one cell row."""
    n = labels.shape[0]
    stride = n + 1
    ri, rj = np.nonzero(labels == INNER)
    if ri.size == 0:
        raise ModulusError("flux problem needs inner cells")
    row = int(np.round(ri.mean()))
    in_row = rj[ri == row]
    if in_row.size == 0:
        row = int(ri[np.argmin(np.abs(ri - np.round(ri.mean())))])
        in_row = rj[ri == row]
    col0 = int(in_row.max()) + 1
    lower = vert_edges[:, 0]
    er = lower // stride
    ec = lower % stride
    return ((er == row) & (ec >= col0)).astype(float)


def flux_energy(labels: np.ndarray) -> float:
    """Energy of the solved unit-period flux function on the domain
    cells; an upper bound for the modulus of any annulus covered by
    them."""
    n = labels.shape[0]
    horiz, vert = _edge_system(labels == DOMAIN)
    if horiz.size == 0:
        raise ModulusError("flux problem needs domain cells")
    delta_v = _cut_offsets(labels, vert)
    edges = np.concatenate([horiz, vert])
    deltas = np.concatenate([np.zeros(horiz.shape[0]), delta_v])
    i, j, w, d = _accumulate(edges, deltas)
    gauge = np.array([i[0]])
    x = _solve_graph(i, j, w, gauge, np.zeros(1), (n + 1) * (n + 1), rhs_delta=d)
    return _energy(x, i, j, w, delta=d)


def modulus_bracket(
    tight: np.ndarray, loose: np.ndarray, resolution: int, refinements: int = 0, meta=None
) -> ModulusBound:
    """Bracket from a conservatively small (tight) and large (loose)
    labelling of the same annulus."""
    e_u = potential_energy(tight)
    lo = 1.0 / e_u
    hi = flux_energy(loose)
    return ModulusBound(lo, hi, resolution, refinements, dict(meta or {}))


def separation_ok(tight: np.ndarray) -> bool:
    """At least two cells between the plates: the dilated hole must not
    reach the outer plate."""
    grown = ndimage.binary_dilation(tight == INNER, structure=np.ones((3, 3), dtype=bool))
    return not bool((grown & (tight == OUTER)).any())


# ---------------------------------------------------------------------------
# analytic labelling for synthetic annuli
# ---------------------------------------------------------------------------


def round_labels(
    n: int,
    r: float,
    R: float,
    policy: str,
    center: complex = 0j,
    pad: float = 0.05,
) -> np.ndarray:
    """Label grid for {r < |z - center| < R}.

    ``tight`` covers the hole and the outside with INNER / OUTER cells
    (domain slightly small); ``loose`` marks every cell meeting the
    closed annulus as DOMAIN (cover slightly large).
    """
    if policy not in ("tight", "loose"):
        raise ValueError(f"unknown policy {policy!r}")
    half = R * (1.0 + pad)
    h = 2.0 * half / n
    ax = np.arange(n) * h - half + h / 2 + center.real
    ay = np.arange(n) * h - half + h / 2 + center.imag
    cx, cy = np.meshgrid(ax, ay, indexing="xy")
    dist = np.hypot(cx - center.real, cy - center.imag)
    reach = h * np.sqrt(0.5)
    labels = np.full((n, n), DOMAIN, dtype=np.int8)
    if policy == "tight":
        labels[dist - reach <= r] = INNER
        labels[dist + reach >= R] = OUTER
    else:
        labels[:] = OUTER
        meets = (dist - reach <= R) & (dist + reach >= r)
        labels[meets] = DOMAIN
        labels[dist + reach < r] = INNER
        if not (labels == INNER).any():
            labels[dist == dist.min()] = INNER
    return labels


def square_labels(n: int, side_in: float, side_out: float, policy: str) -> np.ndarray:
    """Label grid for the frame between two concentric axis-parallel
    squares (half sides ``side_in`` < ``side_out``)."""
    if policy not in ("tight", "loose"):
        raise ValueError(f"unknown policy {policy!r}")
    half = side_out * 1.05
    h = 2.0 * half / n
    ax = np.arange(n) * h - half + h / 2
    cx, cy = np.meshgrid(ax, ax, indexing="xy")
    cheb = np.maximum(np.abs(cx), np.abs(cy))
    reach = h * 0.5
    labels = np.full((n, n), DOMAIN, dtype=np.int8)
    if policy == "tight":
        labels[cheb - reach <= side_in] = INNER
        labels[cheb + reach >= side_out] = OUTER
    else:
        labels[:] = OUTER
        meets = (cheb - reach <= side_out) & (cheb + reach >= side_in)
        labels[meets] = DOMAIN
        labels[cheb + reach < side_in] = INNER
        if not (labels == INNER).any():
            labels[cheb == cheb.min()] = INNER
    return labels


def _round_single(r, R, n, resolution, refinements, center) -> ModulusBound:
    tight = round_labels(n, r, R, "tight", center)
    loose = round_labels(n, r, R, "loose", center)
    return modulus_bracket(tight, loose, resolution, refinements, {"r": r, "R": R})


def round_annulus_modulus(
    r: float,
    R: float,
    resolution: int = DEFAULT_RESOLUTION,
    refinements: int = 0,
    center: complex = 0j,
) -> ModulusBound:
    """Bracketed modulus of a round annulus (oracle: log(R/r) / 2pi).

    Wide annuli are split into concentric rings of bounded log-width
    and the ring brackets summed; this is exact for circles cutting a
    round annulus, and keeps every hole resolvable on its ring's grid.
    """
    if not (0 < r < R):
        raise ValueError("need 0 < r < R")
    n = resolution * (2**refinements)
    gap = math.log(R / r)
    if gap <= 1.6 * _RING_MAX_LOG:
        return _round_single(r, R, n, resolution, refinements, center)
    rings = int(math.ceil(gap / _RING_MAX_LOG))
    radii = r * np.exp(np.linspace(0.0, gap, rings + 1))
    lo = 0.0
    hi = 0.0
    for a, b in zip(radii[:-1], radii[1:]):
        bound = _round_single(float(a), float(b), n, resolution, refinements, center)
        lo += bound.lo
        hi += bound.hi
    return ModulusBound(lo, hi, resolution, refinements, {"r": r, "R": R, "rings": rings})


def square_frame_modulus(
    side_in: float,
    side_out: float,
    resolution: int = DEFAULT_RESOLUTION,
    refinements: int = 0,
) -> ModulusBound:
    """Bracketed modulus of a concentric square frame."""
    if not (0 < side_in < side_out):
        raise ValueError("need 0 < side_in < side_out")
    n = resolution * (2**refinements)
    tight = square_labels(n, side_in, side_out, "tight")
    loose = square_labels(n, side_in, side_out, "loose")
    return modulus_bracket(
        tight, loose, resolution, refinements, {"side_in": side_in, "side_out": side_out}
    )


# ---------------------------------------------------------------------------
# puzzle-piece annuli
# ---------------------------------------------------------------------------


def _require_nested(g, outer: PieceId, inner: PieceId) -> None:
    if inner.depth <= outer.depth:
        raise ValueError("inner piece must be strictly deeper than outer piece")
    d, i = inner.depth, inner.index
    while d > outer.depth:
        i = g.parent_index(d, i)
        d -= 1
    if i != outer.index:
        raise ValueError(f"piece {inner} is not nested inside {outer}")


def _piece_annulus_labels(g, outer: PieceId, inner: PieceId, n: int):
    """Tight and loose label grids for the annulus between two nested
    raster pieces, from tri-state cell membership against each piece."""
    x0, y0, x1, y1 = g.piece(outer).bbox
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    half = 0.5 * max(x1 - x0, y1 - y0) * (1.0 + 8.0 / n)
    xs = np.linspace(cx - half, cx + half, n + 1)
    ys = np.linspace(cy - half, cy + half, n + 1)
    so = g.piece_cell_states(outer.depth, outer.index, xs, ys)
    si = g.piece_cell_states(inner.depth, inner.index, xs, ys)
    if ((si != 0) & (so != 1)).any():
        raise ModulusError(
            f"annulus {outer} -> {inner} too thin at {n} cells: hole band meets outer band"
        )
    tight = np.full((n, n), DOMAIN, dtype=np.int8)
    tight[so != 1] = OUTER
    tight[si != 0] = INNER
    if not separation_ok(tight):
        raise ModulusError(f"annulus {outer} -> {inner} under two cells wide at {n} cells")
    loose = np.full((n, n), OUTER, dtype=np.int8)
    loose[(so != 0) & (si != 1)] = DOMAIN
    loose[si == 1] = INNER
    if not (loose == INNER).any():
        raise ModulusError(f"piece {inner} unresolved at {n} cells")
    return tight, loose, 2.0 * half / n


def annulus_modulus(
    g,
    outer: PieceId,
    inner: PieceId,
    resolution: int = DEFAULT_RESOLUTION,
    max_refinements: int = _MAX_REFINEMENTS,
) -> AnnulusEstimate:
    """Bracketed modulus of the annulus between two nested puzzle
    pieces, refining the grid up to ``max_refinements`` doublings when
    the separation is under two cells."""
    _require_nested(g, outer, inner)
    last = None
    n = resolution
    for k in range(max_refinements + 1):
        n = resolution * (2**k)
        try:
            tight, loose, cell = _piece_annulus_labels(g, outer, inner, n)
            bound = modulus_bracket(
                tight, loose, resolution, k, {"outer": (outer.depth, outer.index), "inner": (inner.depth, inner.index)}
            )
        except ModulusError as err:
            last = err
            continue
        return _estimate_from_bound(outer, inner, bound, cell)
    raise ModulusError(
        f"annulus {outer} -> {inner} unresolved up to {n} cells: {last}"
    )


# ---------------------------------------------------------------------------
# laws and aggregates
# ---------------------------------------------------------------------------


def transfer_modulus(m: float, degree: int) -> float:
    """Modulus of a degree-d proper unbranched pull-back: m / d."""
    if degree < 1:
        raise ValueError("cover degree must be a positive integer")
    return m / degree


def _lower_of(b) -> float:
    lo = b.lower if isinstance(b, AnnulusEstimate) else b.lo
    return max(lo, 0.0)


def nu_floor(g, n: int, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Smallest certified lower bound of mod(parent - child) over all
    parent/child piece pairs at depths (n, n+1).

    Pair labels inherit the graph's raster certification, so a pair
    whose true gap is narrower than the stored uncertain bands stays
    thin at every local resolution and raises rather than returning a
    floor taken over a subset of the pairs.
    """
    if n + 1 >= len(g.levels):
        raise ValueError(f"graph depth {len(g.levels) - 1} has no level {n + 1}")
    floor = math.inf
    for i in range(g.n_pieces(n + 1)):
        inner = PieceId(n + 1, i)
        outer = PieceId(n, g.parent_index(n + 1, i))
        est = annulus_modulus(g, outer, inner, resolution)
        floor = min(floor, est.lower)
    if not math.isfinite(floor):
        raise ModulusError(f"no parent/child pairs at depths {n} -> {n + 1}")
    return floor


@dataclass(frozen=True)
class MuSeries:
    """Per-level annulus moduli between each nest level's thickened and
    plain return pieces."""

    levels: tuple[tuple[int, AnnulusEstimate], ...]

    @property
    def min_lower(self) -> float:
        resolved = [est.lower for _, est in self.levels]
        return min(resolved) if resolved else 0.0

    def partial_sums(self) -> list[float]:
        return groetzsch_partials([est for _, est in self.levels])


def mu_series(g, nest, resolution: int = DEFAULT_RESOLUTION, max_refinements: int = _MAX_REFINEMENTS) -> MuSeries:
    """Bracket mod(K'_n - closure(K_n)) on every complete nest level.

    ``nest`` supplies conservative label grids for its own deep pieces
    through ``annulus_labels(record, n_cells, policy)``; levels whose
    annuli stay thin after refinement are reported with infinite error
    rather than dropped.
    """
    out = []
    for rec in nest.complete_levels():
        outer_id = PieceId(rec.kp_depth, -1)
        inner_id = PieceId(rec.k_depth, -1)
        meta = {"n": rec.n, "nest_chain": True}
        best = None
        cell = 0.0
        for k in range(max_refinements + 1):
            cells = resolution * (2**k)
            try:
                tight, cell = nest.annulus_labels(rec, cells, "tight")
                loose, _ = nest.annulus_labels(rec, cells, "loose")
                bound = modulus_bracket(tight, loose, resolution, k, meta)
            except ModulusError:
                continue
            best = bound
            break
        if best is None:
            est = AnnulusEstimate(outer_id, inner_id, 0.0, math.inf, cell, max_refinements, meta)
        else:
            est = _estimate_from_bound(outer_id, inner_id, best, cell)
            est = AnnulusEstimate(
                est.outer, est.inner, est.modulus, est.error, est.resolution, est.refinements, meta
            )
        out.append((rec.n, est))
    return MuSeries(tuple(out))


def _verify_chain(estimates: list[AnnulusEstimate], g) -> None:
    for a, b in zip(estimates[:-1], estimates[1:]):
        if a.inner is None or b.outer is None:
            raise ModulusError("cannot verify nesting of unlabelled annuli")
        if b.outer.depth < a.inner.depth:
            raise ModulusError(f"annulus at depth {b.outer.depth} is not inside {a.inner}")
        if a.meta.get("nest_chain") and b.meta.get("nest_chain"):
            # containment of consecutive nest annuli is certified by the
            # nest's own monotonicity check
            continue
        if a.inner.index < 0 or b.outer.index < 0 or g is None:
            raise ModulusError("cannot verify nesting without a graph")
        d, i = b.outer.depth, b.outer.index
        while d > a.inner.depth:
            i = g.parent_index(d, i)
            d -= 1
        if i != a.inner.index:
            raise ModulusError(f"annulus {b.outer} overlaps the hole of {a.inner}")


def groetzsch_sum(estimates, g=None) -> float:
    """Sum of certified lower bounds over pairwise nested disjoint
    annuli: a lower bound for the modulus of any annulus containing
    them all, and the divergence evidence of the series."""
    ests = list(estimates)
    if not ests:
        return 0.0
    _verify_chain(ests, g)
    return sum(_lower_of(e) for e in ests)


def groetzsch_partials(bounds) -> list[float]:
    """Cumulative sums of the certified lower bounds: the divergence
    witness sequence for nested disjoint annuli."""
    out = []
    acc = 0.0
    for b in bounds:
        acc += _lower_of(b)
        out.append(acc)
    return out


def superadditive_consistent(whole, parts) -> bool:
    """Brackets never contradict mod(whole) >= sum of parts for
    disjoint nested sub-annuli."""
    hi = whole.upper if isinstance(whole, AnnulusEstimate) else whole.hi
    return hi >= sum(_lower_of(p) for p in parts)


def refine_until_positive(
    label_fn,
    base_resolution: int = DEFAULT_RESOLUTION,
    max_refinements: int = _MAX_REFINEMENTS,
    meta=None,
) -> ModulusBound:
    """Thin-annulus policy: refine the grid until the lower bound is
    positive, up to ``max_refinements`` doublings, then keep the best
    certified bracket.

    ``label_fn(n, policy)`` must return labels at cell resolution n.
    """
    best = None
    for k in range(max_refinements + 1):
        n = base_resolution * (2**k)
        try:
            bound = modulus_bracket(
                label_fn(n, "tight"), label_fn(n, "loose"), base_resolution, k, meta
            )
        except ModulusError:
            continue
        if best is None or bound.lo > best.lo:
            best = bound
        if bound.lo > 0:
            return bound
    if best is None:
        return ModulusBound(0.0, float("inf"), base_resolution, max_refinements, dict(meta or {}))
    return best
