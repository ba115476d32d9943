"""Puzzle partition of the dynamical plane on adaptive cell grids.

Depth-k pieces are the connected components of ``{G < r0 * d**-k}``.
Each piece carries a raster window (origin, cell size, certified mask)
cropped to its bounding box; children of a piece are extracted from a
finer raster restricted to the parent window, so nesting is guaranteed
by construction and the per-depth work stays proportional to the area
actually occupied by pieces.

Cell classification is margin-certified: a cell counts as inside only
when the Green values at its four corners sit below the depth
threshold by more than the certified evaluation error plus a local
variation allowance (the extremes sit on the cell boundary because G
is harmonic off the filled Julia set).  Most cells never see a Green
evaluation at all: G(f(z)) = d*G(z) and thresholds are geometric in d,
so one application of f plus a lookup into the previous level's stored
classification rasters settles every cell that does not straddle the
stored fringe band.  Cells near the level line remain "uncertain" and
belong to no piece; point location refuses to answer for points that
only hit uncertain cells.

The builder validates itself: for every piece Q the dynamical degrees
of the pieces mapping onto Q must sum to the polynomial degree, and
failures trigger a targeted re-rasterisation at doubled resolution
before they are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .polynomials import (
    CriticalPoint,
    Polynomial,
    critical_points,
    escape_radius,
    evaluate,
    evaluate_derivative,
    green,
    green_batch,
)

__all__ = [
    "PieceId",
    "PuzzlePiece",
    "PuzzleGraph",
    "PuzzleError",
    "R0Choice",
    "choose_r0",
    "build_puzzle",
    "piece_of",
    "fiber_degree_check",
]

# mask codes inside a piece window
INSIDE = 1
FRINGE = 2

_GREEN_CHUNK = 1_500_000
_FLUSH_CELLS = 4_000_000
_MAX_REFINED_CELLS = 8_000_000
_MIN_CELLS_ACROSS = 10
_IMAGE_SAMPLES = 32
_EDT_SLAB_VOXELS = 2_000_000
_ATTR_ITERS = 4
_FRAGMENT_CELLS = 64
# rasterisation stops once a level carries this many pieces; deeper
# levels pull piece centers back through f instead, which keeps the
# combinatorics exact where cell grids would start splitting pieces at
# necks thinner than any affordable cell size
_SWITCH_COUNT = 192
# total window cells permitted per unit of quality target
_WINDOW_CAP = 6.0
# one-time distortion allowance turning inverse-branch derivative
# products into piece diameter bounds
_KOEBE = 4.0
# substeps when continuing an inverse branch along a center segment
_LIFT_STEPS = 8

# labeling structure: 4-connectivity within each slice of a stack, none
# across slices
_STACK_STRUCTURE = np.zeros((3, 3, 3), dtype=int)
_STACK_STRUCTURE[1] = [[0, 1, 0], [1, 1, 1], [0, 1, 0]]
_PAD_STRUCTURE = ndimage.iterate_structure(_STACK_STRUCTURE, 2)


class PuzzleError(RuntimeError):
    """Raised when the puzzle cannot be built soundly at the requested
    resolution (unresolvable fiber sums, straddling criticals, ...)."""


@dataclass(frozen=True, order=True)
class PieceId:
    depth: int
    index: int


@dataclass(frozen=True)
class PuzzlePiece:
    """Lightweight view of one puzzle piece.

    ``criticals`` lists indices into the graph's critical table for the
    critical points contained in the piece; ``dyn_degree`` is
    ``1 + sum(local_degree - 1)`` over those points, which equals the
    covering degree of f from this piece onto its image piece.
    """

    id: PieceId
    parent: PieceId | None
    image: PieceId | None
    criticals: tuple[int, ...]
    dyn_degree: int
    bbox: tuple[float, float, float, float]
    cell_count: int
    diameter: float


class _Level:
    """Struct-of-arrays storage for all pieces at one depth."""

    __slots__ = (
        "depth",
        "threshold",
        "count",
        "parent",
        "image",
        "dyn_degree",
        "bbox",
        "cell_count",
        "fringe_count",
        "win_x0",
        "win_y0",
        "win_h",
        "win_nx",
        "win_ny",
        "mask_off",
        "mask_buf",
        "children_off",
        "children_idx",
        "crit_piece",
        "algebraic",
        "center",
        "rad",
        "fiber_off",
        "fiber_idx",
    )

    def __init__(self, depth: int, threshold: float, count: int):
        self.depth = depth
        self.threshold = threshold
        self.count = count
        self.parent = np.full(count, -1, dtype=np.int64)
        self.image = np.full(count, -1, dtype=np.int64)
        self.dyn_degree = np.ones(count, dtype=np.int16)
        self.bbox = np.zeros((count, 4), dtype=np.float64)
        self.cell_count = np.zeros(count, dtype=np.int64)
        self.fringe_count = np.zeros(count, dtype=np.int64)
        self.win_x0 = np.zeros(count, dtype=np.float64)
        self.win_y0 = np.zeros(count, dtype=np.float64)
        self.win_h = np.zeros(count, dtype=np.float64)
        self.win_nx = np.zeros(count, dtype=np.int32)
        self.win_ny = np.zeros(count, dtype=np.int32)
        self.mask_off = np.zeros(count + 1, dtype=np.int64)
        self.mask_buf = np.zeros(0, dtype=np.uint8)
        self.children_off: np.ndarray | None = None
        self.children_idx: np.ndarray | None = None
        self.crit_piece: dict[int, int] = {}
        self.algebraic = False
        self.center: np.ndarray | None = None
        self.rad: np.ndarray | None = None
        self.fiber_off: np.ndarray | None = None
        self.fiber_idx: np.ndarray | None = None

    def mask(self, i: int) -> np.ndarray:
        if self.algebraic:
            raise PuzzleError("algebraic levels carry no cell masks")
        a, b = self.mask_off[i], self.mask_off[i + 1]
        return self.mask_buf[a:b].reshape(self.win_ny[i], self.win_nx[i])

    def diameter(self, i: int) -> float:
        x0, y0, x1, y1 = self.bbox[i]
        return float(np.hypot(x1 - x0, y1 - y0))


def _mask_codes(level: _Level, piece: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised mask lookup: code of each (piece, point) pair, 0 when
    the point falls outside the piece window."""
    piece = np.asarray(piece, dtype=np.int64)
    h = level.win_h[piece]
    ix = np.floor((x - level.win_x0[piece]) / h).astype(np.int64)
    iy = np.floor((y - level.win_y0[piece]) / h).astype(np.int64)
    nx = level.win_nx[piece].astype(np.int64)
    ny = level.win_ny[piece].astype(np.int64)
    ok = (ix >= 0) & (iy >= 0) & (ix < nx) & (iy < ny)
    codes = np.zeros(piece.shape, dtype=np.uint8)
    if ok.any():
        flat = level.mask_off[piece[ok]] + iy[ok] * nx[ok] + ix[ok]
        codes[ok] = level.mask_buf[flat]
    return codes


def _mask_hit(level: _Level, i: int, x: float, y: float) -> int:
    return int(_mask_codes(level, np.array([i]), np.array([x]), np.array([y]))[0])


class _RasterSet:
    """Whole-window classification rasters from one level build, keyed
    by the extraction parent.

    Piece masks are cropped to component bounding boxes, which is right
    for point location but makes the next level's pull-back probe
    several sibling crops per corner.  Keeping each extraction window's
    full INSIDE/FRINGE raster lets that probe be a single lookup in the
    window of the image piece."""

    __slots__ = ("x0", "y0", "h", "nx", "ny", "off", "buf")

    def __init__(self, entries: dict[int, tuple], count: int):
        self.x0 = np.zeros(count)
        self.y0 = np.zeros(count)
        self.h = np.ones(count)
        self.nx = np.zeros(count, dtype=np.int64)
        self.ny = np.zeros(count, dtype=np.int64)
        sizes = np.zeros(count, dtype=np.int64)
        for i, (x0, y0, h, nx, ny, _) in entries.items():
            self.x0[i] = x0
            self.y0[i] = y0
            self.h[i] = h
            self.nx[i] = nx
            self.ny[i] = ny
            sizes[i] = nx * ny
        self.off = np.concatenate(([0], np.cumsum(sizes)))
        self.buf = np.zeros(self.off[-1], dtype=np.uint8)
        for i, (_, _, _, _, _, ras) in entries.items():
            self.buf[self.off[i] : self.off[i + 1]] = ras.reshape(-1)


def _raster_codes(rs: _RasterSet, key: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Vectorised raster lookup; code 0 for points outside the keyed
    window (certified out by the coarser level that bounded it)."""
    h = rs.h[key]
    ix = np.floor((x - rs.x0[key]) / h).astype(np.int64)
    iy = np.floor((y - rs.y0[key]) / h).astype(np.int64)
    nx = rs.nx[key]
    ok = (ix >= 0) & (iy >= 0) & (ix < nx) & (iy < rs.ny[key])
    codes = np.zeros(x.shape, dtype=np.uint8)
    if ok.any():
        kk = key[ok]
        codes[ok] = rs.buf[rs.off[kk] + iy[ok] * nx[ok] + ix[ok]]
    return codes


@dataclass
class R0Choice:
    """Outcome of the puzzle-scale selection.

    ``trivial`` marks the connected regime (no escaping critical point)
    where the puzzle degenerates to one piece per depth and the value
    defaults to 1.  ``nudges`` counts multiplicative adjustments made to
    keep depth thresholds away from the critical values of G; ``floor``
    is the smallest positive Green value over escaping criticals.
    """

    value: float
    trivial: bool = False
    shrink_steps: int = 0
    nudges: int = 0
    floor: float = 0.0


def choose_r0(
    p: Polynomial,
    crits: Sequence[CriticalPoint] | None = None,
    budget: int = 2048,
    shrink: float = 0.5,
) -> R0Choice:
    """Pick the puzzle scale r0.

    Start from ``shrink`` times the smallest positive Green value over
    the escaping critical points, so no critical point of f sits in
    ``{0 < G < r0}``.  Then nudge multiplicatively while any depth
    threshold lands in the dangerous band just above a critical value
    of G (the sublevel set would be pinched through a thin neck there;
    landing exactly on a critical value is harmless because the margin
    logic excludes the pinch point itself).  Because consecutive depth
    thresholds differ by the exact factor d, one fractional-part check
    per critical value covers every depth at once.

    The "at most one bounded critical point per depth-0 piece"
    normalisation is enforced by the builder, which raises so the
    caller can halve r0 and retry; the cross-critical first-row
    condition is re-checked once tableaux exist.
    """
    if crits is None:
        crits = critical_points(p, budget=budget)
    gvals = []
    for c in crits:
        if c.orbit_status == "escaping":
            gv = green(p, c.location, tol=1e-13)
            if gv.value > 0:
                gvals.append(gv.value)
    if not gvals:
        return R0Choice(value=1.0, trivial=True, floor=0.0)
    floor = min(gvals)
    r0 = shrink * floor
    logd = np.log(p.degree)
    nudges = 0
    for _ in range(12):
        bad = False
        for g in gvals:
            x = ((np.log(r0) - np.log(g)) / logd) % 1.0
            if 0.02 <= x <= 0.2:
                bad = True
                break
        if not bad:
            break
        r0 *= 0.77
        nudges += 1
    return R0Choice(value=float(r0), nudges=nudges, floor=floor)


# ---------------------------------------------------------------------------
# batched raster classification
# ---------------------------------------------------------------------------


def _emit_job(x0, y0, h, nx, ny, cand):
    """Coordinate bookkeeping for one same-size window stack: the cell
    corners that actually need evaluating.  Corners are shared between
    adjacent cells, and the Green function is harmonic off the filled
    Julia set, so the cell extremes sit on the boundary."""
    m = cand.shape[0]
    need_corner = np.zeros((m, ny + 1, nx + 1), dtype=bool)
    need_corner[:, :-1, :-1] |= cand
    need_corner[:, :-1, 1:] |= cand
    need_corner[:, 1:, :-1] |= cand
    need_corner[:, 1:, 1:] |= cand
    flat_c = np.flatnonzero(need_corner)
    si, rem = np.divmod(flat_c, (ny + 1) * (nx + 1))
    iy, ix = np.divmod(rem, nx + 1)
    zc = (x0[si] + h[si] * ix) + 1j * (y0[si] + h[si] * iy)
    return {
        "cand": cand,
        "m": m,
        "nx": nx,
        "ny": ny,
        "flat_c": flat_c,
        "zc": zc,
    }


def _finish_job(job, vc, ec, threshold):
    """Margin-certified inside/uncertain classification for one stack."""
    m, ny, nx = job["m"], job["ny"], job["nx"]
    cand = job["cand"]
    gc = np.full((m, ny + 1, nx + 1), np.inf)
    gce = np.zeros_like(gc)
    gc.reshape(-1)[job["flat_c"]] = vc
    gce.reshape(-1)[job["flat_c"]] = ec

    c00 = gc[:, :-1, :-1]
    c01 = gc[:, :-1, 1:]
    c10 = gc[:, 1:, :-1]
    c11 = gc[:, 1:, 1:]
    with np.errstate(invalid="ignore"):
        gmax = np.maximum.reduce([c00, c01, c10, c11])
        gmin = np.minimum.reduce([c00, c01, c10, c11])
        spread = np.where(np.isfinite(gmax), gmax - gmin, 0.0)
        err = np.maximum.reduce(
            [gce[:, :-1, :-1], gce[:, :-1, 1:], gce[:, 1:, :-1], gce[:, 1:, 1:]]
        )
        margin = err + 0.75 * spread
        inside = cand & (gmax < threshold - margin)
        uncert = cand & ~inside & (gmin < threshold + margin)
    return inside, uncert


def _classify_stacks(p, jobs, threshold, tol, budget):
    """Run the Green evaluation for many window stacks in one batched
    pass and classify each stack.  Returns [(inside, uncert), ...]."""
    if not jobs:
        return []
    zs = np.concatenate([j["zc"] for j in jobs])
    v = np.empty(zs.size)
    e = np.empty(zs.size)
    for a in range(0, zs.size, _GREEN_CHUNK):
        b = min(a + _GREEN_CHUNK, zs.size)
        vv, ee, _, esc = green_batch(p, zs[a:b], tol=tol, budget=budget)
        v[a:b] = np.where(esc, vv, 0.0)
        e[a:b] = ee
    out = []
    pos = 0
    for j in jobs:
        nc = j["zc"].size
        out.append(_finish_job(j, v[pos : pos + nc], e[pos : pos + nc], threshold))
        pos += nc
    return out


def _corner_grid(x0, y0, h, nx, ny):
    cx = x0[:, None] + h[:, None] * np.arange(nx + 1)
    cy = y0[:, None] + h[:, None] * np.arange(ny + 1)
    return cx[:, None, :] + 1j * cy[:, :, None]


def _classify_pullback(g, k, jobs):
    """Two-pass cell classification for one level.  The pull-back pass
    settles the bulk: each corner is mapped forward once and looked up
    in the raster of the window that produced its image piece (G(f(z))
    = d G(z) and thresholds are geometric in d, so a corner is below
    the depth-k threshold exactly when its image is below the depth-
    (k-1) threshold).  Cells whose corners all read INSIDE are in,
    cells whose corners all read certified-out are out.  Only the thin
    band straddling the stored fringe gets a direct Green evaluation
    with the margin rule, so certification is renewed at every level
    instead of eroding through repeated pull-backs."""
    if not jobs:
        return []
    p = g.polynomial
    thr = g.threshold(k)
    prev = g.levels[k - 1]
    rs = g._raster

    grids = []
    need = []
    for j in jobs:
        ny, nx = j["ny"], j["nx"]
        mem = j["mem"]
        zc = _corner_grid(j["x0"], j["y0"], j["h"], nx, ny)
        w = evaluate(p, zc.reshape(-1))
        if k == 1:
            key = np.zeros(mem.size, dtype=np.int64)
        else:
            key = prev.image[mem]
        codes = _raster_codes(
            rs,
            np.repeat(key, (ny + 1) * (nx + 1)),
            np.ascontiguousarray(w.real),
            np.ascontiguousarray(w.imag),
        ).reshape(mem.size, ny + 1, nx + 1)
        del w
        sc = np.where(codes == INSIDE, np.uint8(2), np.uint8(0))
        sc[codes == FRINGE] = 1
        c00 = sc[:, :-1, :-1]
        c01 = sc[:, :-1, 1:]
        c10 = sc[:, 1:, :-1]
        c11 = sc[:, 1:, 1:]
        smin = np.minimum(np.minimum(c00, c01), np.minimum(c10, c11))
        smax = np.maximum(np.maximum(c00, c01), np.maximum(c10, c11))
        inside = j["cand"] & (smin == 2)
        ambig = j["cand"] & ~inside & (smax >= 1)
        amb_corner = np.zeros(sc.shape, dtype=bool)
        amb_corner[:, :-1, :-1] |= ambig
        amb_corner[:, :-1, 1:] |= ambig
        amb_corner[:, 1:, :-1] |= ambig
        amb_corner[:, 1:, 1:] |= ambig
        flat_a = np.flatnonzero(amb_corner)
        grids.append((inside, ambig, flat_a))
        need.append(zc.reshape(-1)[flat_a])
        del zc, sc, codes, amb_corner

    zs = np.concatenate(need) if need else np.empty(0, dtype=complex)
    v = np.empty(zs.size)
    e = np.empty(zs.size)
    tol, budget = _green_tol(g, k), _green_budget(g, k)
    for a in range(0, zs.size, _GREEN_CHUNK):
        b = min(a + _GREEN_CHUNK, zs.size)
        vv, ee, _, esc = green_batch(p, zs[a:b], tol=tol, budget=budget)
        v[a:b] = np.where(esc, vv, 0.0)
        e[a:b] = ee

    out = []
    pos = 0
    for j, (inside, ambig, flat_a) in zip(jobs, grids):
        ny, nx = j["ny"], j["nx"]
        m = j["mem"].size
        gv = np.full((m, ny + 1, nx + 1), np.inf)
        ge = np.zeros_like(gv)
        gv.reshape(-1)[flat_a] = v[pos : pos + flat_a.size]
        ge.reshape(-1)[flat_a] = e[pos : pos + flat_a.size]
        pos += flat_a.size
        c00, c01 = gv[:, :-1, :-1], gv[:, :-1, 1:]
        c10, c11 = gv[:, 1:, :-1], gv[:, 1:, 1:]
        with np.errstate(invalid="ignore"):
            gmax = np.maximum.reduce([c00, c01, c10, c11])
            gmin = np.minimum.reduce([c00, c01, c10, c11])
            spread = np.where(np.isfinite(gmax), gmax - gmin, 0.0)
            err = np.maximum.reduce(
                [ge[:, :-1, :-1], ge[:, :-1, 1:], ge[:, 1:, :-1], ge[:, 1:, 1:]]
            )
            margin = err + 0.75 * spread
            fine_in = ambig & (gmax < thr - margin)
            fine_un = ambig & ~fine_in & (gmin < thr + margin)
        out.append((inside | fine_in, fine_un))
    return out


def _dilate_stack(stack: np.ndarray) -> np.ndarray:
    return ndimage.binary_dilation(stack, structure=_PAD_STRUCTURE)


def _attribute_edt(labels: np.ndarray, uncert: np.ndarray) -> np.ndarray:
    """Exact nearest-certified-cell attribution, slab-bounded.

    Attribution never crosses window slices: a slice with no certified
    cells of its own keeps its uncertain cells unattributed rather than
    gluing them onto a component of an unrelated window."""
    out = np.zeros_like(labels)
    m, ny, nx = labels.shape
    per = max(1, _EDT_SLAB_VOXELS // max(ny * nx, 1))
    big = 1e9  # slice-axis spacing so in-slice lookups always win
    for a in range(0, m, per):
        b = min(a + per, m)
        lab = labels[a:b]
        unc = uncert[a:b]
        if not unc.any() or not lab.any():
            continue
        _, (iz, iy, ix) = ndimage.distance_transform_edt(
            lab == 0, sampling=(big, 1.0, 1.0), return_indices=True
        )
        near = lab[iz, iy, ix]
        own = np.arange(b - a)[:, None, None]
        out[a:b] = np.where(unc & (iz == own), near, 0)
    return out


def _attribute_uncertain(labels: np.ndarray, uncert: np.ndarray) -> np.ndarray:
    """Assign each uncertain cell the label of a nearby certified cell
    in the same slice, so the full uncertain halo of every component is
    known.  The band is thin, so a few label-propagation sweeps settle
    it; stragglers beyond that range fall back to an exact distance
    transform."""
    if not uncert.any():
        return np.zeros_like(labels)
    assigned = labels.copy()
    fp = _STACK_STRUCTURE.astype(bool)
    rem = uncert & (assigned == 0)
    for _ in range(_ATTR_ITERS):
        if not rem.any():
            break
        grown = ndimage.grey_dilation(assigned, footprint=fp)
        empty = assigned == 0
        assigned[empty] = grown[empty]
        rem = uncert & (assigned == 0)
    if rem.any():
        far = _attribute_edt(labels, rem)
        assigned[rem] = far[rem]
    return np.where(uncert, assigned, 0)


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


class PuzzleGraph:
    """All puzzle levels for one polynomial, depth 0..N.

    Pieces are addressed by :class:`PieceId`; indices within a depth are
    assigned by sorting supports by their leftmost-lowest certified
    cell, so rebuilding with identical inputs yields identical ids.

    Levels up to ``switch_depth`` carry cell rasters; deeper levels are
    built by pulling the previous level's piece centers back through f
    (one solved preimage per unit of covering degree), which keeps the
    combinatorics exact once pieces outnumber what cell grids can
    separate cleanly.  ``switch_depth`` is None when every level is a
    raster level.
    """

    def __init__(self, polynomial, r0, depth, base_resolution, criticals):
        self.polynomial = polynomial
        self.r0 = float(r0)
        self.depth = int(depth)
        self.base_resolution = int(base_resolution)
        self.criticals = list(criticals)
        self.bounded_criticals = [
            c for c in self.criticals if c.orbit_status == "bounded"
        ]
        self.levels: list[_Level] = []
        self.warnings: list[str] = []
        self.refine_rounds = 0
        self.switch_depth: int | None = None
        self._raster: _RasterSet | None = None
        # certified (value, error) of G at each critical point; bounded
        # orbits pin the value to 0 exactly
        self._crit_green: list[tuple[float, float]] = []

    # -- accessors -------------------------------------------------------

    def threshold(self, k: int) -> float:
        return self.r0 * float(self.polynomial.degree) ** (-k)

    def level(self, k: int) -> _Level:
        return self.levels[k]

    def n_pieces(self, k: int) -> int:
        return self.levels[k].count

    def piece(self, pid: PieceId) -> PuzzlePiece:
        lv = self.levels[pid.depth]
        i = pid.index
        crits = tuple(sorted(ci for ci, pi in lv.crit_piece.items() if pi == i))
        return PuzzlePiece(
            id=pid,
            parent=PieceId(pid.depth - 1, int(lv.parent[i])) if pid.depth > 0 else None,
            image=PieceId(pid.depth - 1, int(lv.image[i])) if pid.depth > 0 else None,
            criticals=crits,
            dyn_degree=int(lv.dyn_degree[i]),
            bbox=tuple(float(v) for v in lv.bbox[i]),
            cell_count=int(lv.cell_count[i]),
            diameter=lv.diameter(i),
        )

    def pieces(self, k: int) -> list[PieceId]:
        return [PieceId(k, i) for i in range(self.levels[k].count)]

    def parent_index(self, k: int, i: int) -> int:
        return int(self.levels[k].parent[i])

    def image_index(self, k: int, i: int) -> int:
        return int(self.levels[k].image[i])

    def children_indices(self, k: int, i: int) -> np.ndarray:
        lv = self.levels[k]
        if lv.children_off is None or i < 0:
            return np.empty(0, dtype=np.int64)
        return lv.children_idx[lv.children_off[i] : lv.children_off[i + 1]]

    def fiber_indices(self, k: int, q: int) -> np.ndarray:
        """Depth-k pieces whose image is the depth-(k-1) piece ``q``."""
        lv = self.levels[k]
        if lv.fiber_off is None:
            return np.flatnonzero(lv.image == q)
        return lv.fiber_idx[lv.fiber_off[q] : lv.fiber_off[q + 1]]

    def critical_piece_index(self, k: int, crit_index: int) -> int:
        return self.levels[k].crit_piece.get(crit_index, -1)

    def piece_diameter(self, k: int, i: int) -> float:
        return self.levels[k].diameter(i)

    def piece_cell_states(self, k: int, i: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Tri-state membership of axis-aligned cells against piece i at
        depth k: 0 certified outside, 1 certified inside, 2 undecided.

        ``xs``/``ys`` are cell edge coordinates; the result has shape
        (len(ys)-1, len(xs)-1).  A query cell is aggregated over every
        raster cell of the piece window it intersects, so 1 needs the
        full cover certified INSIDE and 0 needs zero overlap with
        INSIDE or FRINGE cells; rounding slop at shared edges only
        widens the undecided band.
        """
        lv = self.levels[k]
        if lv.algebraic:
            raise PuzzleError(
                f"depth {k} is tracked by centers only; no cell raster for piece {i}"
            )
        m = lv.mask(i)
        ny, nx = m.shape
        s_in = np.zeros((ny + 1, nx + 1), dtype=np.int64)
        s_any = np.zeros((ny + 1, nx + 1), dtype=np.int64)
        np.cumsum(np.cumsum(m == INSIDE, axis=0), axis=1, out=s_in[1:, 1:])
        np.cumsum(np.cumsum(m != 0, axis=0), axis=1, out=s_any[1:, 1:])
        h = float(lv.win_h[i])
        eps = 1e-9
        cx0 = (np.asarray(xs[:-1], dtype=float) - lv.win_x0[i]) / h
        cx1 = (np.asarray(xs[1:], dtype=float) - lv.win_x0[i]) / h
        ry0 = (np.asarray(ys[:-1], dtype=float) - lv.win_y0[i]) / h
        ry1 = (np.asarray(ys[1:], dtype=float) - lv.win_y0[i]) / h
        c0 = np.clip(np.floor(cx0 - eps).astype(np.int64), 0, nx)
        c1 = np.clip(np.ceil(cx1 + eps).astype(np.int64), 0, nx)
        r0 = np.clip(np.floor(ry0 - eps).astype(np.int64), 0, ny)
        r1 = np.clip(np.ceil(ry1 + eps).astype(np.int64), 0, ny)
        in_window = ((cx0 >= -eps) & (cx1 <= nx + eps))[None, :] & (
            (ry0 >= -eps) & (ry1 <= ny + eps)
        )[:, None]
        cols = np.maximum(c1[None, :] - c0[None, :], 0)
        rows = np.maximum(r1[:, None] - r0[:, None], 0)
        area = rows * cols
        n_in = s_in[r1[:, None], c1[None, :]] - s_in[r0[:, None], c1[None, :]] - s_in[
            r1[:, None], c0[None, :]
        ] + s_in[r0[:, None], c0[None, :]]
        n_any = s_any[r1[:, None], c1[None, :]] - s_any[r0[:, None], c1[None, :]] - s_any[
            r1[:, None], c0[None, :]
        ] + s_any[r0[:, None], c0[None, :]]
        out = np.full((len(ys) - 1, len(xs) - 1), 2, dtype=np.int8)
        out[n_any == 0] = 0
        out[in_window & (area > 0) & (n_in == area)] = 1
        return out

    # -- point location ---------------------------------------------------

    def locate_index(self, z: complex, k: int) -> int:
        """Index of the depth-k piece containing z, or -1 when z lies
        outside every depth-k piece.

        Descends the window rasters from depth 0.  When a point hits
        only uncertain cells (typical near level-line tips, where
        certifying a cell would need quadratically finer grids), the
        piece is resolved combinatorially instead: among the children of
        the current piece, the one whose image piece contains f(z) --
        located recursively one depth up -- is the answer whenever it is
        unique.  On center-based levels the descent is combinatorial
        throughout, with membership certified through the Green value of
        z itself and fiber twins inside critical pieces separated by
        distance to the solved centers.  Only a genuine ambiguity or an
        uncertain raster landing raises :class:`PuzzleError`.
        """
        orbit = [complex(z)]
        for _ in range(k):
            orbit.append(complex(evaluate(self.polynomial, orbit[-1])))
        memo: dict[tuple[int, int], int] = {}
        gcache: list[tuple[float, float]] = []

        def green_of_z() -> tuple[float, float]:
            # G(orbit[l]) = d**l G(z) exactly, and threshold(j) * d**-l
            # = threshold(j + l), so one certified value of G(z) settles
            # membership at every (depth, orbit position) pair
            if not gcache:
                gv = green(
                    self.polynomial,
                    orbit[0],
                    tol=0.05 * self.threshold(k),
                    budget=_green_budget(self, k) + 2 * k,
                )
                gcache.append((gv.value, gv.abs_error))
            return gcache[0]

        def resolve(j: int, l: int) -> int:
            key = (j, l)
            if key in memo:
                return memo[key]
            if self.levels[j].algebraic:
                lv = self.levels[j]
                gv, ge = green_of_z()
                thr = self.threshold(j + l)
                if gv - ge >= thr:
                    memo[key] = -1
                    return -1
                if gv + ge >= thr:
                    raise PuzzleError(
                        f"point {orbit[0]} too close to the depth-{j + l} "
                        f"level line to certify membership"
                    )
                cur = resolve(j - 1, l)
                img = resolve(j - 1, l + 1)
                if cur < 0 or img < 0:
                    raise PuzzleError(
                        f"inconsistent descent for {orbit[l]} at depth {j}"
                    )
                kids = self.children_indices(j - 1, cur)
                cands = [int(c) for c in kids if int(lv.image[c]) == img]
                if not cands:
                    raise PuzzleError(
                        f"inconsistent descent for {orbit[l]} at depth {j}: "
                        f"f(z) sits in piece {img} but no child maps there"
                    )
                if len(cands) == 1:
                    idx = cands[0]
                else:
                    dist = np.abs(orbit[l] - lv.center[cands])
                    o = np.argsort(dist)
                    if dist[o[0]] > 0.5 * dist[o[1]]:
                        raise PuzzleError(
                            f"point {orbit[l]} ambiguous between twin pieces "
                            f"{[cands[int(t)] for t in o[:2]]} at depth {j}"
                        )
                    idx = cands[int(o[0])]
                memo[key] = idx
                return idx
            x, y = orbit[l].real, orbit[l].imag
            if j == 0:
                lv0 = self.levels[0]
                idx = -1
                fringe = False
                for i in range(lv0.count):
                    code = _mask_hit(lv0, i, x, y)
                    if code == INSIDE:
                        idx = i
                        break
                    if code == FRINGE:
                        fringe = True
                if idx < 0 and fringe:
                    raise PuzzleError(
                        f"point {orbit[l]} in uncertain band at depth 0"
                    )
                memo[key] = idx
                return idx
            cur = resolve(j - 1, l)
            if cur < 0:
                memo[key] = -1
                return -1
            lv = self.levels[j]
            kids = [int(c) for c in self.children_indices(j - 1, cur)]
            idx = -1
            fringe = False
            for ci in kids:
                code = _mask_hit(lv, ci, x, y)
                if code == INSIDE:
                    idx = ci
                    break
                if code == FRINGE:
                    fringe = True
            if idx < 0 and fringe:
                img = resolve(j - 1, l + 1)
                if img < 0:
                    idx = -1
                else:
                    cands = [ci for ci in kids if int(lv.image[ci]) == img]
                    if len(cands) == 1:
                        idx = cands[0]
                    elif not cands:
                        raise PuzzleError(
                            f"inconsistent descent for {orbit[l]} at depth {j}: "
                            f"f(z) sits in piece {img} but no child maps there"
                        )
                    else:
                        raise PuzzleError(
                            f"point {orbit[l]} ambiguous between twin pieces "
                            f"{cands} at depth {j}"
                        )
            memo[key] = idx
            return idx

        return resolve(k, 0)


def piece_of(g: PuzzleGraph, z: complex, k: int) -> PieceId | None:
    """PieceId of the depth-k piece containing ``z`` (None if z lies
    outside the depth-k sublevel set)."""
    idx = g.locate_index(z, k)
    return PieceId(k, idx) if idx >= 0 else None


def fiber_degree_check(g: PuzzleGraph) -> list[tuple[PieceId, int, int]]:
    """Verify sum(dyn_degree) == degree over every image fiber.

    Returns (target piece, expected, got) for every failure; an empty
    list means every depth passed.
    """
    out = []
    d = g.polynomial.degree
    for k in range(1, g.depth + 1):
        lv = g.levels[k]
        prev = g.levels[k - 1]
        sums = np.zeros(prev.count, dtype=np.int64)
        np.add.at(sums, lv.image, lv.dyn_degree.astype(np.int64))
        for q in np.flatnonzero(sums != d):
            out.append((PieceId(k - 1, int(q)), d, int(sums[q])))
    return out


# ---------------------------------------------------------------------------
# builder
# ---------------------------------------------------------------------------


def build_puzzle(
    p: Polynomial,
    r0: float,
    depth: int,
    base_resolution: int = 512,
    budget: int = 2048,
    criticals: Sequence[CriticalPoint] | None = None,
) -> PuzzleGraph:
    """Build the puzzle graph for ``p`` down to ``depth``.

    ``base_resolution`` controls the depth-0 raster; deeper windows are
    refined per piece until a level carries ``_SWITCH_COUNT`` pieces,
    after which levels are built by pulling piece centers back through
    f.  Raises :class:`PuzzleError` when a piece would contain two
    bounded critical points (the caller should shrink r0) or when the
    level structure stays inconsistent after targeted refinement.
    """
    if criticals is None:
        criticals = critical_points(p, budget=budget)
    g = PuzzleGraph(p, r0, depth, base_resolution, criticals)
    _certify_critical_greens(g, budget)
    _build_level0(g)
    for k in range(1, depth + 1):
        if g.switch_depth is not None:
            _build_level_pullback(g, k)
            continue
        ok = _build_level(g, k)
        if ok:
            if k >= 2 and k < depth and g.levels[k].count >= _SWITCH_COUNT:
                g.switch_depth = k
                _prepare_switch(g, k)
        elif k >= 3:
            # the raster went combinatorially inconsistent; the previous
            # level passed its own piece-count audit, so rebuild this
            # level from its centers instead of refining cells further.
            # Warnings about the discarded attempt go with it.
            g.levels = g.levels[:k]
            g.warnings = [
                w for w in g.warnings if not w.startswith(f"depth {k}:")
            ]
            g.warnings.append(
                f"depth {k}: raster level discarded for center pull-back"
            )
            g.switch_depth = k - 1
            _prepare_switch(g, k - 1)
            _build_level_pullback(g, k)
    if g.switch_depth is not None:
        g._raster = None
    return g


def _certify_critical_greens(g: PuzzleGraph, budget: int) -> None:
    """Certified G at every critical point, fixed once per build.

    Piece counts and covering degrees hinge on which critical points sit
    inside each sublevel set, so an orbit the classifier could not
    decide within budget makes every deeper answer unreliable; that is
    reported here instead of surfacing as a broken fiber sum later.
    """
    p = g.polynomial
    tol = min(1e-13, 0.01 * g.threshold(g.depth))
    for c in g.criticals:
        if c.orbit_status == "bounded":
            g._crit_green.append((0.0, 0.0))
        elif c.orbit_status == "escaping":
            gv = green(p, c.location, tol=tol, budget=max(budget, 256))
            g._crit_green.append((gv.value, gv.abs_error))
        else:
            raise PuzzleError(
                f"critical point {c.location} has an undecided orbit; "
                f"raise the classification budget"
            )


def _green_tol(g: PuzzleGraph, k: int) -> float:
    # classification only needs errors well under the margin scale; a few
    # percent of the threshold keeps bounded-orbit cells from burning the
    # whole iteration budget on pointless tail refinement
    return max(g.threshold(k) * 0.05, 1e-15)


def _green_budget(g: PuzzleGraph, k: int) -> int:
    return 4 * (k + 8) + 32


def _build_level0(g: PuzzleGraph) -> None:
    p = g.polynomial
    thr = g.threshold(0)
    a_d = abs(p.coeffs[-1])
    S = p.coefficient_sum_bound
    # outside max(R, (2S+2)/a_d) every step at least squares the modulus
    # up to a factor a_d/2, giving G >= log|z| - c0 there
    Rsafe = max(escape_radius(p), (2.0 * S + 2.0) / a_d)
    c0 = max(0.0, float(np.log(2.0 / a_d))) / (p.degree - 1)
    radius = 1.05 * max(Rsafe, float(np.exp(g.r0 + c0)))

    # coarse pass to find the occupied region
    n = 160
    h = 2 * radius / n
    job = _emit_job(
        np.array([-radius]), np.array([-radius]), np.array([h]), n, n,
        np.ones((1, n, n), dtype=bool),
    )
    inside, uncert = _classify_stacks(p, [job], thr, _green_tol(g, 0), _green_budget(g, 0))[0]
    occ = inside[0] | uncert[0]
    if not occ.any():
        raise PuzzleError("no depth-0 region found; r0 may be too small")
    iy, ix = np.nonzero(occ)
    bx0 = -radius + h * max(ix.min() - 2, 0)
    bx1 = -radius + h * min(ix.max() + 3, n)
    by0 = -radius + h * max(iy.min() - 2, 0)
    by1 = -radius + h * min(iy.max() + 3, n)

    # fine pass on the cropped box
    m = g.base_resolution
    hf = max(bx1 - bx0, by1 - by0) / m
    nx = int(np.ceil((bx1 - bx0) / hf))
    ny = int(np.ceil((by1 - by0) / hf))
    job = _emit_job(
        np.array([bx0]), np.array([by0]), np.array([hf]), nx, ny,
        np.ones((1, ny, nx), dtype=bool),
    )
    inside, uncert = _classify_stacks(p, [job], thr, _green_tol(g, 0), _green_budget(g, 0))[0]
    labels, _ = ndimage.label(inside, structure=_STACK_STRUCTURE)
    uncert_lab = _attribute_uncertain(labels, uncert)
    batch = _component_batch(
        np.array([-1]), labels, uncert_lab, np.array([bx0]), np.array([by0]), np.array([hf])
    )
    _store_children(g, 0, thr, [batch])
    _locate_criticals(g, 0)
    if g.depth > 0:
        ras = inside[0].astype(np.uint8)
        ras[uncert[0]] = FRINGE
        g._raster = _RasterSet({0: (bx0, by0, hf, nx, ny, ras)}, 1)


def _window_plan(lv: _Level, mult: np.ndarray):
    """Child window geometry over all parent pieces: finer cells, cropped
    to each parent window plus a one-parent-cell pad.

    The cell size aims at ``target`` certified cells per parent, keeps
    at least ``_MIN_CELLS_ACROSS`` cells across the thin direction, and
    is bounded below so a window's total cell count stays within
    ``_WINDOW_CAP`` times the target (coarsening over-resolved parents
    whose fringe band dwarfs their certified area).

    Shallow levels get a richer target: pieces pinch near preimages of
    escaping critical points and those pinch chains map down to the
    critical points themselves, so once the first few levels classify
    their pinch cells crisply every deeper level inherits the crispness
    through pull-back, while a coarse bootstrap fractures pieces at the
    pinches on every level.  Repair multipliers shrink a window's cells
    down to an absolute per-window ceiling."""
    x0 = lv.bbox[:, 0] - lv.win_h
    y0 = lv.bbox[:, 1] - lv.win_h
    x1 = lv.bbox[:, 2] + lv.win_h
    y1 = lv.bbox[:, 3] + lv.win_h
    span_x = x1 - x0
    span_y = y1 - y0
    small = np.minimum(span_x, span_y)
    cert = np.maximum(lv.cell_count.astype(np.float64), 1.0)
    if lv.depth <= 2:
        target = 4096.0
    elif lv.depth <= 4:
        target = 1024.0
    else:
        target = 768.0
    occupied = cert + lv.fringe_count.astype(np.float64)
    # quality: about `target` certified cells per parent; cap: total
    # cells per window bounded even when the fringe band dwarfs the
    # certified area, coarsening if a parent arrives over-resolved
    h_quality = lv.win_h * np.sqrt(cert / target)
    h_cap = lv.win_h * np.sqrt(occupied / (_WINDOW_CAP * target))
    h = np.maximum(h_quality, h_cap)
    h = np.minimum(h, small / _MIN_CELLS_ACROSS)
    h = h / np.maximum(mult, 1.0)
    h = np.maximum(h, lv.win_h * np.sqrt(occupied / _MAX_REFINED_CELLS))
    # quantise dims so many windows share a stack shape
    nx = np.maximum(2, np.ceil(span_x / h - 1e-9).astype(np.int64))
    ny = np.maximum(2, np.ceil(span_y / h - 1e-9).astype(np.int64))
    nx = ((nx + 7) // 8) * 8
    ny = ((ny + 7) // 8) * 8
    return x0, y0, h, nx, ny


def _parent_candidates(prev: _Level, mem: np.ndarray, x0, y0, h, gnx, gny):
    """Candidate cells for a same-size window stack: cells over the
    parent's inside or fringe region, dilated by two fine cells."""
    jx = np.arange(gnx)
    jy = np.arange(gny)
    cx = x0[:, None] + h[:, None] * (jx[None, :] + 0.5)
    cy = y0[:, None] + h[:, None] * (jy[None, :] + 0.5)
    pw_h = prev.win_h[mem]
    pix = np.floor((cx - prev.win_x0[mem, None]) / pw_h[:, None]).astype(np.int64)
    piy = np.floor((cy - prev.win_y0[mem, None]) / pw_h[:, None]).astype(np.int64)
    nxp = prev.win_nx[mem].astype(np.int64)
    nyp = prev.win_ny[mem].astype(np.int64)
    okx = (pix >= 0) & (pix < nxp[:, None])
    oky = (piy >= 0) & (piy < nyp[:, None])
    pixc = np.clip(pix, 0, (nxp - 1)[:, None])
    piyc = np.clip(piy, 0, (nyp - 1)[:, None])
    flat = (
        prev.mask_off[mem][:, None, None]
        + piyc[:, :, None] * nxp[:, None, None]
        + pixc[:, None, :]
    )
    codes = prev.mask_buf[flat]
    cand = (codes > 0) & oky[:, :, None] & okx[:, None, :]
    return _dilate_stack(cand)


@dataclass
class _RecBatch:
    """Per-component records from one window stack, struct-of-arrays."""

    parent: np.ndarray
    key_x: np.ndarray
    key_y: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    h: np.ndarray
    nx: np.ndarray
    ny: np.ndarray
    cells: np.ndarray
    fringe: np.ndarray
    buf: np.ndarray
    off: np.ndarray
    alive: np.ndarray


def _component_batch(parents, labels, uncert_lab, x0, y0, h):
    """Split labeled window stacks into per-component records.

    Crops cover the certified cells together with their attributed
    uncertain halo, so every point of the true piece reads either
    INSIDE or FRINGE from the stored window.  The sort key is the
    global position of each component's first certified cell in raster
    order, which makes piece ids reproducible."""
    nlab = int(labels.max())
    if nlab == 0:
        return None
    combined = np.where(labels > 0, labels, uncert_lab)
    objs = ndimage.find_objects(combined)
    idx = np.arange(1, nlab + 1)
    cc = np.bincount(labels.reshape(-1), minlength=nlab + 1)[1:]
    fc = np.bincount(uncert_lab.reshape(-1), minlength=nlab + 1)[1:]
    _, sny, snx = labels.shape
    first = ndimage.minimum(
        np.arange(labels.size, dtype=np.float64).reshape(labels.shape),
        labels=labels,
        index=idx,
    )
    first = np.asarray(first, dtype=np.int64)
    fsi, frem = np.divmod(first, sny * snx)
    fiy, fix = np.divmod(frem, snx)

    par = np.empty(nlab, dtype=np.int64)
    rx0 = np.empty(nlab)
    ry0 = np.empty(nlab)
    rnx = np.empty(nlab, dtype=np.int32)
    rny = np.empty(nlab, dtype=np.int32)
    bufs = []
    for li in range(1, nlab + 1):
        ss, sy, sx = objs[li - 1]
        si = ss.start
        sub = labels[si, sy, sx]
        unc = uncert_lab[si, sy, sx]
        crop = ((sub == li) * np.uint8(INSIDE)) | ((unc == li) * np.uint8(FRINGE))
        bufs.append(crop.reshape(-1))
        par[li - 1] = parents[si]
        rx0[li - 1] = x0[si] + h[si] * sx.start
        ry0[li - 1] = y0[si] + h[si] * sy.start
        rny[li - 1], rnx[li - 1] = crop.shape
    sizes = (rnx.astype(np.int64)) * rny
    off = np.concatenate(([0], np.cumsum(sizes)))
    return _RecBatch(
        parent=par,
        key_x=x0[fsi] + h[fsi] * (fix + 0.5),
        key_y=y0[fsi] + h[fsi] * (fiy + 0.5),
        x0=rx0,
        y0=ry0,
        h=h[fsi],
        nx=rnx,
        ny=rny,
        cells=cc.astype(np.int64),
        fringe=fc.astype(np.int64),
        buf=np.concatenate(bufs) if bufs else np.zeros(0, dtype=np.uint8),
        off=off,
        alive=np.ones(nlab, dtype=bool),
    )


def _store_children(g: PuzzleGraph, k: int, thr: float, batches) -> None:
    """Materialise a level from record batches, sorted by each
    component's first certified cell in global raster order."""
    live = [b for b in batches if b is not None and b.alive.any()]
    if not live:
        raise PuzzleError(f"no certified cells at depth {k}; raise resolution")

    def cat(field):
        return np.concatenate([getattr(b, field)[b.alive] for b in live])

    parent = cat("parent")
    key_x, key_y = cat("key_x"), cat("key_y")
    order = np.lexsort((parent, key_x, key_y))
    n = order.size
    lv = _Level(k, thr, n)
    lv.parent = parent[order]
    lv.win_x0 = cat("x0")[order]
    lv.win_y0 = cat("y0")[order]
    lv.win_h = cat("h")[order]
    lv.win_nx = cat("nx")[order]
    lv.win_ny = cat("ny")[order]
    lv.cell_count = cat("cells")[order]
    lv.fringe_count = cat("fringe")[order]
    lv.bbox = np.stack(
        [
            lv.win_x0,
            lv.win_y0,
            lv.win_x0 + lv.win_h * lv.win_nx,
            lv.win_y0 + lv.win_h * lv.win_ny,
        ],
        axis=1,
    )

    sizes = lv.win_nx.astype(np.int64) * lv.win_ny
    lv.mask_off = np.concatenate(([0], np.cumsum(sizes)))
    allbuf = np.concatenate(
        [b.buf[np.repeat(b.alive, np.diff(b.off))] for b in live]
    )
    base = np.concatenate(([0], np.cumsum([b.alive @ np.diff(b.off) for b in live])))
    owner_base = np.repeat(base[:-1], [int(b.alive.sum()) for b in live])
    scount = np.concatenate([np.diff(b.off)[b.alive] for b in live])
    # compact per-batch offsets into positions within allbuf
    inner = np.concatenate(
        [np.concatenate(([0], np.cumsum(np.diff(b.off)[b.alive])))[:-1] for b in live]
    )
    src_start = (owner_base + inner)[order]
    src_len = scount[order]
    total = int(src_len.sum())
    gather = np.repeat(src_start, src_len) + (
        np.arange(total) - np.repeat(lv.mask_off[:-1], src_len)
    )
    lv.mask_buf = allbuf[gather]
    g.levels.append(lv)
    if k > 0:
        _index_children(g, k)


def _index_children(g: PuzzleGraph, k: int) -> None:
    lv = g.levels[k]
    prevlv = g.levels[k - 1]
    counts = np.zeros(prevlv.count + 1, dtype=np.int64)
    np.add.at(counts, lv.parent + 1, 1)
    prevlv.children_off = np.cumsum(counts)
    prevlv.children_idx = np.argsort(lv.parent, kind="stable").astype(np.int64)


def _drop_twin_fragments(g: PuzzleGraph, k: int) -> None:
    """Remove duplicate territory claims.

    Where two pieces pinch together at depth k-1, the windows of both
    parents overlap the shared uncertain band and each can certify a
    sliver of the neighbour's child, which then surfaces as a tiny
    extra piece breaking that fiber's degree sum.  Classification is
    sound either way (the sliver really is below the threshold), so
    ownership is arbitrated here: a small piece whose certified cells
    land on certified cells of a strictly larger piece is a duplicate
    claim and is dropped."""
    if k == 0:
        return
    lv = g.levels[k]
    small = np.flatnonzero(lv.cell_count <= _FRAGMENT_CELLS)
    if small.size == 0:
        return
    prev = g.levels[k - 1]
    drop = np.zeros(lv.count, dtype=bool)
    for ii in small:
        i = int(ii)
        if k >= 2:
            gp = int(prev.parent[int(lv.parent[i])])
            sibs = g.children_indices(k - 2, gp)
            cands = np.concatenate(
                [g.children_indices(k - 1, int(s)) for s in sibs]
            )
        else:
            cands = np.arange(lv.count)
        mask = lv.mask(i)
        iy, ix = np.nonzero(mask == INSIDE)
        xs = lv.win_x0[i] + lv.win_h[i] * (ix + 0.5)
        ys = lv.win_y0[i] + lv.win_h[i] * (iy + 0.5)
        for jj in cands:
            j = int(jj)
            if j == i or lv.cell_count[j] <= lv.cell_count[i]:
                continue
            codes = _mask_codes(lv, np.full(xs.size, j, dtype=np.int64), xs, ys)
            if (codes == INSIDE).any():
                drop[i] = True
                break
    if not drop.any():
        return
    idx = np.flatnonzero(~drop)
    sizes = np.diff(lv.mask_off)
    lv.mask_buf = lv.mask_buf[np.repeat(~drop, sizes)]
    lv.mask_off = np.concatenate(([0], np.cumsum(sizes[idx])))
    for f in (
        "parent",
        "image",
        "dyn_degree",
        "cell_count",
        "fringe_count",
        "win_x0",
        "win_y0",
        "win_h",
        "win_nx",
        "win_ny",
    ):
        setattr(lv, f, getattr(lv, f)[idx])
    lv.bbox = lv.bbox[idx]
    lv.count = idx.size
    _index_children(g, k)


def _interior_samples(lv: _Level, per_piece: int):
    """Up to ``per_piece`` certified-cell centers per piece, spread by
    stride through each piece's cell list.  Returns (piece, x, y)."""
    flat = np.flatnonzero(lv.mask_buf == INSIDE)
    piece = np.searchsorted(lv.mask_off, flat, side="right") - 1
    starts = np.searchsorted(piece, np.arange(lv.count))
    counts = np.diff(np.append(starts, piece.size))
    if (counts == 0).any():
        i = int(np.flatnonzero(counts == 0)[0])
        raise PuzzleError(f"piece {lv.depth}:{i} has no certified cells")
    take = np.minimum(per_piece, counts)
    grp0 = np.repeat(np.concatenate(([0], np.cumsum(take)[:-1])), take)
    rank = np.arange(int(take.sum())) - grp0
    sel = np.repeat(starts, take) + (rank * np.repeat(counts, take)) // np.repeat(
        take, take
    )
    flat_sel = flat[sel]
    piece_sel = piece[sel]
    local = flat_sel - lv.mask_off[piece_sel]
    nx = lv.win_nx[piece_sel].astype(np.int64)
    iy, ix = np.divmod(local, nx)
    x = lv.win_x0[piece_sel] + lv.win_h[piece_sel] * (ix + 0.5)
    y = lv.win_y0[piece_sel] + lv.win_h[piece_sel] * (iy + 0.5)
    return piece_sel, x, y


def _extract_for_parents(
    g: PuzzleGraph, k: int, subset: np.ndarray, mult: np.ndarray, rasters
):
    """Classify child windows for the given parent pieces.  Returns
    per-component record batches and deposits each window's full
    classification raster in ``rasters`` (keyed by parent index) for the
    next level's pull-back.  Window stacks are flushed in bounded
    batches to cap peak memory."""
    prev = g.levels[k - 1]
    x0, y0, h, nx, ny = _window_plan(prev, mult)
    groups: dict[tuple[int, int], list[int]] = {}
    for i in subset:
        groups.setdefault((int(nx[i]), int(ny[i])), []).append(int(i))
    batches: list[_RecBatch | None] = []

    def _flush(pending):
        results = _classify_pullback(g, k, pending)
        for j, (inside, uncert) in zip(pending, results):
            mem = j["mem"]
            labels, _n = ndimage.label(inside, structure=_STACK_STRUCTURE)
            uncert_lab = _attribute_uncertain(labels, uncert)
            if rasters is not None:
                ras = inside.astype(np.uint8)
                ras[uncert] = FRINGE
                for s, mi in enumerate(mem):
                    rasters[int(mi)] = (
                        x0[mi], y0[mi], h[mi], j["nx"], j["ny"], ras[s],
                    )
            batches.append(
                _component_batch(mem, labels, uncert_lab, x0[mem], y0[mem], h[mem])
            )

    pending: list = []
    cells = 0
    for (gnx, gny), members in sorted(groups.items()):
        grid = (gnx + 1) * (gny + 1)
        step = max(1, _FLUSH_CELLS // grid)
        for a in range(0, len(members), step):
            mem = np.asarray(members[a : a + step], dtype=np.int64)
            cand = _parent_candidates(prev, mem, x0[mem], y0[mem], h[mem], gnx, gny)
            pending.append(
                {
                    "mem": mem,
                    "x0": x0[mem],
                    "y0": y0[mem],
                    "h": h[mem],
                    "nx": gnx,
                    "ny": gny,
                    "cand": cand,
                }
            )
            cells += mem.size * grid
            if cells >= _FLUSH_CELLS:
                _flush(pending)
                pending, cells = [], 0
    if pending:
        _flush(pending)
    return batches


def _build_level(g: PuzzleGraph, k: int) -> bool:
    thr = g.threshold(k)
    prev = g.levels[k - 1]
    mult = np.ones(prev.count)
    # the final level's rasters have no reader
    rasters: dict[int, tuple] | None = {} if k < g.depth else None
    batches = _extract_for_parents(g, k, np.arange(prev.count), mult, rasters)

    for attempt in range(4):
        if len(g.levels) > k:
            g.levels = g.levels[:k]
        _store_children(g, k, thr, batches)
        _drop_twin_fragments(g, k)
        _wire_images(g, k)
        _locate_criticals(g, k)
        bad = _fiber_errors(g, k)
        # every piece contains deeper territory, so a childless parent
        # means its window starved and must be re-extracted finer
        childless = np.flatnonzero(np.diff(prev.children_off) == 0)
        if not bad and childless.size == 0:
            break
        if attempt == 3:
            if bad:
                g.warnings.append(
                    f"depth {k}: unresolved fiber sums at {len(bad)} pieces"
                )
            if childless.size:
                g.warnings.append(
                    f"depth {k}: {childless.size} parents kept no children"
                )
            break
        g.refine_rounds += 1
        if k == 1:
            targets = np.arange(prev.count)
        else:
            grandparents = list({int(prev.parent[q]) for q in bad})
            tmask = np.isin(prev.image, grandparents)
            tmask[childless] = True
            if not tmask.any():
                tmask[:] = True
            targets = np.flatnonzero(tmask)
        mult[targets] *= 2.0
        for b in batches:
            if b is not None:
                b.alive &= ~np.isin(b.parent, targets)
        batches.extend(_extract_for_parents(g, k, targets, mult, rasters))
    if rasters is not None:
        g._raster = _RasterSet(rasters, prev.count)
    else:
        g._raster = None
    # independent piece-count audit: image wiring balances fibers by
    # construction, so a split piece laundered into a under-full fiber
    # (or a false merge across a sub-cell neck) can pass the degree
    # sums, but it always shifts the level's total count
    lo, hi = _expected_counts(g, k)
    lv = g.levels[k]
    if not (lo <= lv.count <= hi):
        g.warnings.append(
            f"depth {k}: {lv.count} pieces but the pull-back relation "
            f"certifies [{lo}, {hi}]"
        )
        return False
    return not bad and childless.size == 0


def _wire_images(g: PuzzleGraph, k: int) -> None:
    """Determine image pieces one level up by mapping interior samples
    and taking the majority among those that land in certified cells."""
    p = g.polynomial
    lv = g.levels[k]
    prev = g.levels[k - 1]
    if k == 0:
        return
    piece_sel, sx, sy = _interior_samples(lv, _IMAGE_SAMPLES)
    w = evaluate(p, sx + 1j * sy)
    wx, wy = np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag)

    if k == 1:
        all0 = np.arange(prev.count, dtype=np.int64)
        pad = np.broadcast_to(all0, (lv.count, prev.count)).copy()
    else:
        pp = g.levels[k - 2]
        q = prev.image[lv.parent]
        nkids = pp.children_off[q + 1] - pp.children_off[q]
        width = int(nkids.max())
        lanes = np.arange(width)
        pos = pp.children_off[q][:, None] + lanes
        valid = lanes < nkids[:, None]
        pad = np.where(
            valid, pp.children_idx[np.minimum(pos, pp.children_idx.size - 1)], -1
        )
    max_rounds = pad.shape[1]

    def kids_of(i: int) -> list[int]:
        row = pad[i]
        return [int(c) for c in row[row >= 0]]

    assigned = np.full(piece_sel.size, -1, dtype=np.int64)
    weak = np.full(piece_sel.size, -1, dtype=np.int64)
    for r in range(max_rounds):
        open_rows = np.flatnonzero(assigned < 0)
        if open_rows.size == 0:
            break
        cand_r = pad[piece_sel[open_rows], r]
        ok = cand_r >= 0
        if not ok.any():
            continue
        rows = open_rows[ok]
        codes = _mask_codes(prev, cand_r[ok], wx[rows], wy[rows])
        hit = codes == INSIDE
        assigned[rows[hit]] = cand_r[ok][hit]
        soft = (codes == FRINGE) & (weak[rows] < 0)
        weak[rows[soft]] = cand_r[ok][soft]

    # majority vote per piece; samples landing in band cells mis-attributed
    # near pinch points can dissent, and the fiber-sum check catches any
    # piece whose majority itself is wrong
    hi = np.full(lv.count, -1, dtype=np.int64)
    have = assigned >= 0
    if have.any():
        rows = piece_sel[have]
        vals = assigned[have]
        key, counts = np.unique(rows * prev.count + vals, return_counts=True)
        kr = key // prev.count
        kv = key % prev.count
        order = np.lexsort((kv, -counts, kr))
        _, first = np.unique(kr[order], return_index=True)
        hi[kr[order][first]] = kv[order][first]

    unresolved = [int(i) for i in np.flatnonzero(hi < 0)]
    if unresolved:
        # fibers must carry total degree d, so certain assignments cap
        # the remaining capacity of each image piece; iterate elimination
        d = p.degree
        capacity = np.full(prev.count, d, dtype=np.int64)
        wired = hi >= 0
        np.add.at(capacity, hi[wired], -lv.dyn_degree[wired].astype(np.int64))
        changed = True
        while changed and unresolved:
            changed = False
            still = []
            for i in unresolved:
                opts = [
                    c for c in kids_of(i) if capacity[c] >= int(lv.dyn_degree[i])
                ]
                if len(opts) == 1:
                    hi[i] = opts[0]
                    capacity[opts[0]] -= int(lv.dyn_degree[i])
                    changed = True
                else:
                    still.append(i)
            unresolved = still
        if unresolved:
            g.warnings.append(
                f"depth {k}: {len(unresolved)} image links fell back to halo votes"
            )
        for i in unresolved:
            # best guess; a wrong pick shows up as a fiber-sum violation
            # and triggers the targeted refinement pass
            rows = np.flatnonzero((piece_sel == i) & (weak >= 0))
            votes = [int(v) for v in weak[rows]]
            roomy = [v for v in votes if capacity[v] >= int(lv.dyn_degree[i])]
            pool = roomy or votes or kids_of(i)
            if not pool:
                # the expected image fiber shipped empty (starved piece
                # upstream); probe the image point against every piece
                # whose window contains it so the fiber check can flag
                # and repair the true gap instead of crashing here
                srow = np.flatnonzero(piece_sel == i)[0]
                px, py = float(wx[srow]), float(wy[srow])
                inbox = np.flatnonzero(
                    (prev.win_x0 <= px)
                    & (px < prev.win_x0 + prev.win_h * prev.win_nx)
                    & (prev.win_y0 <= py)
                    & (py < prev.win_y0 + prev.win_h * prev.win_ny)
                )
                if inbox.size:
                    codes = _mask_codes(
                        prev,
                        inbox,
                        np.full(inbox.size, px),
                        np.full(inbox.size, py),
                    )
                    hit = inbox[codes == INSIDE]
                    softh = inbox[codes == FRINGE]
                    pool = [int(c) for c in (hit if hit.size else softh)]
            if not pool:
                raise PuzzleError(f"piece {k}:{i} has no image candidates at all")
            best = max(set(pool), key=pool.count)
            hi[i] = best
            capacity[best] -= int(lv.dyn_degree[i])
    lv.image = hi


def _crit_inside(g: PuzzleGraph, ci: int, k: int) -> bool:
    """Certified test for critical point ci lying in the depth-k set."""
    gv, ge = g._crit_green[ci]
    thr = g.threshold(k)
    if gv + ge < thr:
        return True
    if gv - ge >= thr:
        return False
    raise PuzzleError(
        f"critical point {g.criticals[ci].location} sits on the depth-{k} "
        f"level line within certification error; nudge r0"
    )


def _locate_criticals(g: PuzzleGraph, k: int) -> None:
    lv = g.levels[k]
    for ci, c in enumerate(g.criticals):
        if not _crit_inside(g, ci, k):
            continue
        idx = g.locate_index(c.location, k)
        if idx < 0:
            raise PuzzleError(
                f"critical point {c.location} lost at depth {k}"
            )
        lv.crit_piece[ci] = idx
    seen: dict[int, int] = {}
    for ci in sorted(lv.crit_piece):
        if g.criticals[ci].orbit_status != "bounded":
            continue
        pi = lv.crit_piece[ci]
        if pi in seen:
            raise PuzzleError(
                f"two bounded critical points share piece {k}:{pi}; shrink r0"
            )
        seen[pi] = ci
    deg = np.ones(lv.count, dtype=np.int16)
    for ci, pi in lv.crit_piece.items():
        deg[pi] += g.criticals[ci].local_degree - 1
    lv.dyn_degree = deg


def _fiber_errors(g: PuzzleGraph, k: int) -> list[int]:
    d = g.polynomial.degree
    lv = g.levels[k]
    prev = g.levels[k - 1]
    sums = np.zeros(prev.count, dtype=np.int64)
    np.add.at(sums, lv.image, lv.dyn_degree.astype(np.int64))
    return [int(q) for q in np.flatnonzero(sums != d)]


# ---------------------------------------------------------------------------
# center pull-back levels
# ---------------------------------------------------------------------------


def _expected_counts(g: PuzzleGraph, k: int) -> tuple[int, int]:
    """Certified piece-count range at depth k.

    f maps the depth-k sublevel set onto the depth-(k-1) set carrying
    components onto components, so by Riemann-Hurwitz each depth-(k-1)
    piece lifts to d preimage pieces minus one merge per unit of excess
    local degree at the critical points inside the depth-k set.  The
    range collapses to a single integer except when an escaping
    critical point sits on the depth-k level line within its
    certification error.
    """
    d = g.polynomial.degree
    lo = hi = d * g.levels[k - 1].count
    thr = g.threshold(k)
    for (gv, ge), c in zip(g._crit_green, g.criticals):
        m = c.local_degree - 1
        if gv + ge < thr:
            lo -= m
            hi -= m
        elif gv - ge < thr:
            lo -= m
    return lo, hi


def _index_fibers(g: PuzzleGraph, k: int) -> None:
    lv = g.levels[k]
    counts = np.zeros(g.levels[k - 1].count + 1, dtype=np.int64)
    np.add.at(counts, lv.image + 1, 1)
    lv.fiber_off = np.cumsum(counts)
    lv.fiber_idx = np.argsort(lv.image, kind="stable").astype(np.int64)


def _anchor_centers(g: PuzzleGraph, k: int) -> None:
    """Equip a raster level with per-piece anchor centers and radii.

    The anchor is the certified cell deepest inside the certified
    support (distance-transform argmax), which keeps it away from
    fringe bands and pinch necks so its pulled-back preimages stay deep
    inside their own pieces; the radius is the largest center-to-corner
    distance of the stored window plus a two-cell pad, an outer bound
    for the whole piece.
    """
    lv = g.levels[k]
    cx = np.empty(lv.count)
    cy = np.empty(lv.count)
    for i in range(lv.count):
        m = lv.mask(i) == INSIDE
        dist = ndimage.distance_transform_edt(m)
        iy, ix = np.unravel_index(int(np.argmax(dist)), m.shape)
        cx[i] = lv.win_x0[i] + lv.win_h[i] * (ix + 0.5)
        cy[i] = lv.win_y0[i] + lv.win_h[i] * (iy + 0.5)
    lv.center = cx + 1j * cy
    dx = np.maximum(cx - lv.bbox[:, 0], lv.bbox[:, 2] - cx)
    dy = np.maximum(cy - lv.bbox[:, 1], lv.bbox[:, 3] - cy)
    lv.rad = np.hypot(dx, dy) + 2.0 * lv.win_h


def _prepare_switch(g: PuzzleGraph, s: int) -> None:
    """Anchor the two deepest raster levels for the pull-back tail."""
    _anchor_centers(g, s - 1)
    _anchor_centers(g, s)
    _index_fibers(g, s)


def _poly_roots_batch(p: Polynomial, w: np.ndarray) -> np.ndarray:
    """All d solutions of p(x) = w per target, as an (n, d) array.

    Companion-matrix eigenvalues batched over targets, then a few
    Newton polish steps; the polish skips points where p' nearly
    vanishes (paired roots straddling a critical point), whose cluster
    the caller merges anyway.
    """
    d = p.degree
    cs = p.coeff_array
    comp = np.zeros((w.size, d, d), dtype=np.complex128)
    step = np.arange(d - 1)
    comp[:, step + 1, step] = 1.0
    comp[:, :, -1] = -cs[:-1] / cs[-1]
    comp[:, 0, -1] += w / cs[-1]
    roots = np.linalg.eigvals(comp)
    for _ in range(3):
        pv = np.full(roots.shape, cs[-1], dtype=np.complex128)
        dv = np.zeros(roots.shape, dtype=np.complex128)
        for c in cs[-2::-1]:
            dv = dv * roots + pv
            pv = pv * roots + c
        pv -= w[:, None]
        ok = np.abs(dv) > 1e-200
        roots[ok] -= pv[ok] / dv[ok]
    return roots


def _taylor_coeff(p: Polynomial, z: complex, m: int) -> complex:
    """Coefficient of (x - z)**m in the expansion of p around z."""
    cs = p.coeff_array
    dc = [cs[j + m] * math.comb(j + m, m) for j in range(len(cs) - m)]
    acc = dc[-1]
    for c in dc[-2::-1]:
        acc = acc * z + c
    return complex(acc)


def _lift_segment(p: Polynomial, x: np.ndarray, w0: np.ndarray, w1: np.ndarray):
    """Continue the inverse branch of f taking w0 to x along the segment
    from w0 to w1; returns the branch value at w1."""
    x = x.astype(np.complex128).copy()
    for j in range(1, _LIFT_STEPS + 1):
        w = w0 + (j / _LIFT_STEPS) * (w1 - w0)
        for _ in range(3):
            dv = evaluate_derivative(p, x)
            ok = np.abs(dv) > 1e-200
            x[ok] -= (evaluate(p, x[ok]) - w[ok]) / dv[ok]
    return x


def _build_level_pullback(g: PuzzleGraph, k: int) -> None:
    """Build depth k from the previous level's solved piece centers.

    Every depth-k piece covers a depth-(k-1) piece Q, so the pieces
    over Q correspond to the solutions of f(x) = center(Q): one per
    piece, except that the ``local_degree`` solutions clustered around
    a critical point inside the depth-k set form a single piece
    containing that point.  Counts, fibers, parents and covering
    degrees are exact by construction; piece sizes are tracked through
    inverse-branch derivatives as estimates carrying a one-time
    distortion allowance.
    """
    p = g.polynomial
    d = p.degree
    prev = g.levels[k - 1]
    thr = g.threshold(k)
    roots = _poly_roots_batch(p, prev.center)

    # glue root clusters at critical points inside the depth-k set
    keep = np.ones((prev.count, d), dtype=bool)
    degree = np.ones((prev.count, d), dtype=np.int16)
    crit_at: dict[tuple[int, int], int] = {}
    for ci, c in enumerate(g.criticals):
        if not _crit_inside(g, ci, k):
            continue
        w = complex(evaluate(p, c.location))
        q = g.locate_index(w, k - 1)
        if q < 0:
            raise PuzzleError(f"critical value {w} lost at depth {k - 1}")
        m = c.local_degree
        dist = np.abs(roots[q] - c.location)
        order = np.argsort(dist, kind="stable")
        if d > m and dist[order[m]] < 2.0 * dist[order[m - 1]]:
            raise PuzzleError(
                f"cluster around critical point {c.location} at depth {k} "
                f"is not cleanly separated from the rest of its fiber"
            )
        chosen = order[:m]
        if not keep[q, chosen].all():
            raise PuzzleError(
                f"two critical points share a piece at depth {k}; shrink r0"
            )
        keep[q, chosen] = False
        rep = int(chosen[0])
        keep[q, rep] = True
        degree[q, rep] = m
        roots[q, rep] = c.location
        crit_at[(q, rep)] = ci

    flat = keep.reshape(-1)
    flatpos = np.cumsum(flat) - 1
    img = np.repeat(np.arange(prev.count, dtype=np.int64), d)[flat]
    x = roots.reshape(-1)[flat]
    dyn = degree.reshape(-1)[flat]

    # parent = the piece one level up containing x; image(parent(C)) is
    # parent(image(C)), so the candidates are the fiber over the image
    # piece's own parent
    qp = prev.parent[img]
    off = prev.fiber_off
    nfib = off[qp + 1] - off[qp]
    width = int(nfib.max())
    lanes = np.arange(width)
    pos = off[qp][:, None] + lanes[None, :]
    valid = lanes[None, :] < nfib[:, None]
    cand = np.where(valid, prev.fiber_idx[np.minimum(pos, prev.fiber_idx.size - 1)], 0)
    dist = np.abs(x[:, None] - prev.center[cand])
    dist = np.where(valid, dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    rows = np.arange(x.size)
    parent = cand[rows, order[:, 0]].astype(np.int64)
    d1 = dist[rows, order[:, 0]]
    d2 = dist[rows, order[:, 1]] if width > 1 else np.full(x.size, np.inf)
    amb = d1 > 0.5 * d2

    if amb.any() and not prev.algebraic:
        # certified raster masks settle ownership directly
        for r in np.flatnonzero(amb):
            cr = cand[r][valid[r]]
            codes = _mask_codes(
                prev, cr, np.full(cr.size, x[r].real), np.full(cr.size, x[r].imag)
            )
            hit = cr[codes == INSIDE]
            if hit.size == 1:
                parent[r] = hit[0]
                amb[r] = False
    sel = np.flatnonzero(amb)
    if sel.size:
        # lift the segment center(Q) -> center(parent(Q)); the lift stays
        # inside the true parent and ends on one of its solved centers
        end = _lift_segment(
            p, x[sel], prev.center[img[sel]], g.levels[k - 2].center[qp[sel]]
        )
        dist2 = np.abs(end[:, None] - prev.center[cand[sel]])
        dist2 = np.where(valid[sel], dist2, np.inf)
        o2 = np.argsort(dist2, axis=1, kind="stable")
        rr = np.arange(sel.size)
        e1 = dist2[rr, o2[:, 0]]
        e2 = dist2[rr, o2[:, 1]] if width > 1 else np.full(sel.size, np.inf)
        still = e1 > 0.9 * e2
        if still.any():
            r = int(sel[still][0])
            raise PuzzleError(
                f"parent of pulled-back piece near {x[r]} at depth {k} "
                f"remains ambiguous after branch continuation"
            )
        parent[sel] = cand[sel][rr, o2[:, 0]]

    # size estimates through the inverse-branch derivative; clusters use
    # the leading Taylor coefficient at their critical point instead
    dv = evaluate_derivative(p, x)
    rad = prev.rad[img] / np.maximum(np.abs(dv), 1e-300)
    for (q, rep), ci in crit_at.items():
        fi = int(flatpos[q * d + rep])
        c = g.criticals[ci]
        am = abs(_taylor_coeff(p, c.location, c.local_degree))
        rad[fi] = (prev.rad[q] / max(am, 1e-300)) ** (1.0 / c.local_degree)

    order = np.lexsort((parent, x.real, x.imag))
    inv = np.empty(order.size, dtype=np.int64)
    inv[order] = np.arange(order.size)
    lv = _Level(k, thr, int(order.size))
    lv.algebraic = True
    lv.parent = parent[order]
    lv.image = img[order]
    lv.dyn_degree = dyn[order]
    lv.center = x[order]
    lv.rad = rad[order]
    R = _KOEBE * lv.rad
    lv.bbox = np.stack(
        [
            lv.center.real - R,
            lv.center.imag - R,
            lv.center.real + R,
            lv.center.imag + R,
        ],
        axis=1,
    )
    for (q, rep), ci in crit_at.items():
        lv.crit_piece[ci] = int(inv[flatpos[q * d + rep]])
    g.levels.append(lv)
    _index_children(g, k)
    _index_fibers(g, k)
    lo, hi = _expected_counts(g, k)
    if not (lo <= lv.count <= hi):
        raise PuzzleError(
            f"pull-back produced {lv.count} pieces at depth {k}, outside "
            f"the certified range [{lo}, {hi}]"
        )
