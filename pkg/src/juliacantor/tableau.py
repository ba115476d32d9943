"""Tableau calculus over puzzle graphs.

A tableau records, for one orbit, the two-parameter array of piece
identities ent(n, l) = index at depth n of the piece containing the
l-th orbit point, filled for n + l <= N.  Critical positions, the
admissibility rules relating a tableau to the critical tableaux, the
accumulation relation between critical points, children of critical
pieces, and the horizon-relative classification of critical behaviour
all live here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .polynomials import Polynomial
from .puzzle import PieceId, PuzzleError, PuzzleGraph

UNFILLED = -2

# a NonCritical verdict needs this many columns of genuinely empty row
# before the emptiness is trusted (T1 then propagates it downward)
_EMPTY_ROW_MIN_WIDTH = 4

# children with return time in the top third of the remaining window
# count as "still appearing near the horizon"
_STABLE_FRACTION = 2.0 / 3.0


@dataclass(frozen=True)
class Violation:
    """One failed rule instance."""

    rule: str
    tableau: str
    where: tuple
    detail: str = ""


@dataclass(frozen=True)
class CriticalClass:
    """Horizon-relative behaviour of one bounded critical point.

    ``kind`` is one of ``"periodic"``, ``"non_critical"``,
    ``"persistent"``, ``"reluctant"``, ``"undecided"``; ``period`` and
    ``row`` carry the positive witnesses for the first two kinds, and
    ``horizon`` always records the depth the verdict is relative to.
    """

    kind: str
    horizon: int
    period: int | None = None
    row: int | None = None
    detail: dict = field(default_factory=dict)


class Tableau:
    """Piece-identity array of one orbit over a puzzle graph.

    ``entries[n, l]`` is the index of the depth-n piece containing the
    l-th orbit point, or UNFILLED outside the triangle n + l <= N and
    wherever the orbit point has positive Green value above the depth
    threshold.  ``width`` is the number of columns whose orbit point
    lies inside a depth-0 piece at all; a fully interior orbit has
    width N + 1.
    """

    def __init__(self, graph: PuzzleGraph, label: str, start: complex, N: int):
        self.graph = graph
        self.label = label
        self.start = complex(start)
        self.N = int(N)
        self.entries = np.full((N + 1, N + 1), UNFILLED, dtype=np.int64)
        self.width = 0
        # indices into graph.criticals of the bounded critical points,
        # with their per-depth piece columns
        self.crit_ids: list[int] = [
            ci for ci, c in enumerate(graph.criticals) if c.orbit_status == "bounded"
        ]
        self.crit_cols = np.array(
            [
                [graph.critical_piece_index(n, ci) for n in range(N + 1)]
                for ci in self.crit_ids
            ],
            dtype=np.int64,
        ).reshape(len(self.crit_ids), N + 1)

    # -- accessors --------------------------------------------------------

    def entry(self, n: int, l: int) -> int:
        return int(self.entries[n, l])

    def filled(self, n: int, l: int) -> bool:
        return self.entries[n, l] != UNFILLED

    def positions(self, ci: int) -> np.ndarray:
        """Boolean (N+1, N+1) mask of the c-positions for bounded
        critical ``ci`` (graph index)."""
        j = self.crit_ids.index(ci)
        col = self.crit_cols[j][:, None]
        return (self.entries == col) & (self.entries != UNFILLED) & (col != -1)

    def is_position(self, n: int, l: int, ci: int) -> bool:
        j = self.crit_ids.index(ci)
        c = self.crit_cols[j][n]
        return c != -1 and self.entries[n, l] == c

    def any_critical_mask(self) -> np.ndarray:
        """Mask of entries equal to any bounded critical piece."""
        out = np.zeros_like(self.entries, dtype=bool)
        for ci in self.crit_ids:
            out |= self.positions(ci)
        return out

    def to_rows(self) -> list[str]:
        """Aligned text rows (depth down, time across); critical
        positions are marked with the critical's index."""
        marks = {ci: self.positions(ci) for ci in self.crit_ids}
        out = []
        w = max(3, len(str(max(1, self.graph.n_pieces(self.N) - 1))) + 1)
        for n in range(self.N + 1):
            cells = []
            for l in range(self.N + 1 - n):
                if not self.filled(n, l):
                    cells.append("." * 1 + " " * (w - 1))
                    continue
                tag = ""
                for ci in self.crit_ids:
                    if marks[ci][n, l]:
                        tag = f"*{ci}"
                        break
                cells.append(f"{self.entry(n, l)}{tag}".ljust(w))
            out.append(" ".join(cells).rstrip())
        return out


def _orbit_points(p: Polynomial, start: complex, length: int) -> np.ndarray:
    """Forward orbit in working precision high enough that the float
    cast is accurate to well under any piece separation."""
    dps = 40 + int(1.2 * length)
    with mp.workdps(dps):
        cs = p.mp_coeffs(mp.mp)
        z = mp.mpc(start)
        pts = [complex(z)]
        for _ in range(length):
            acc = cs[-1]
            for c in cs[-2::-1]:
                acc = acc * z + c
            z = acc
            pts.append(complex(z))
    return np.array(pts, dtype=np.complex128)


def tableau(g: PuzzleGraph, x: complex, N: int | None = None, label: str = "sample") -> Tableau:
    """Tableau of the orbit of ``x`` to depth ``N`` (default: graph depth).

    Columns stop at the first orbit point outside every depth-0 piece
    (``width`` marks the truncation); within a column, entries stop at
    the depth whose threshold the point's Green value exceeds.
    """
    if N is None:
        N = g.depth
    if N > g.depth:
        raise ValueError(f"tableau depth {N} exceeds graph depth {g.depth}")
    tx = Tableau(g, label, x, N)
    pts = _orbit_points(g.polynomial, x, N)
    for l in range(N + 1):
        z = complex(pts[l])
        # a point in the uncertain raster band ends the column the same
        # way an escaping point does: entries past it stay UNFILLED
        try:
            if g.locate_index(z, 0) < 0:
                break
        except PuzzleError:
            break
        for n in range(N + 1 - l):
            try:
                idx = g.locate_index(z, n)
            except PuzzleError:
                break
            if idx < 0:
                break
            tx.entries[n, l] = idx
        tx.width = l + 1
    return tx


def critical_tableau(g: PuzzleGraph, ci: int, N: int | None = None) -> Tableau:
    """Tableau of the bounded critical point ``ci`` (graph index).

    Column 0 is taken from the graph's tracked critical pieces rather
    than located numerically; the two must agree, which check_rules
    asserts as the column-0 invariant.
    """
    c = g.criticals[ci]
    if c.orbit_status != "bounded":
        raise ValueError("critical tableaux are defined for bounded criticals")
    tx = tableau(g, c.location, N, label=f"crit{ci}")
    col0 = np.array([g.critical_piece_index(n, ci) for n in range(tx.N + 1)])
    tx.entries[:, 0] = col0
    if tx.width == 0:
        tx.width = 1
    return tx


def sample_kf_points(g: PuzzleGraph, count: int, seed: int, pull_steps: int = 16) -> np.ndarray:
    """Points of the filled-in set: random backward orbits of the most
    repelling fixed point.  Backward steps contract, so float precision
    is self-correcting."""
    p = g.polynomial
    rng = np.random.default_rng(seed)
    cs = list(p.coeffs)
    fixed_cs = np.array(cs, dtype=np.complex128)
    fixed_cs[1] -= 1.0
    fixed = np.roots(fixed_cs[::-1])
    from .polynomials import evaluate_derivative

    beta = fixed[int(np.argmax(np.abs(evaluate_derivative(p, fixed))))]
    out = []
    for _ in range(count):
        z = complex(beta)
        for _ in range(pull_steps):
            pre_cs = fixed_cs.copy()
            pre_cs[1] += 1.0
            pre_cs[0] -= z
            roots = np.roots(pre_cs[::-1])
            z = complex(rng.choice(roots))
        out.append(z)
    return np.array(out, dtype=np.complex128)


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


def _check_entry_invariants(tx: Tableau, out: list[Violation]) -> None:
    g = tx.graph
    N = tx.N
    ent = tx.entries
    for n in range(N):
        for l in range(N - n):
            if ent[n + 1, l] == UNFILLED:
                continue
            # column nesting: the parent of the deeper entry is the
            # shallower entry in the same column
            par = g.parent_index(n + 1, int(ent[n + 1, l]))
            if ent[n, l] != UNFILLED and par != ent[n, l]:
                out.append(
                    Violation("nesting", tx.label, (n + 1, l), f"parent {par} != {ent[n, l]}")
                )
            # coherence: stepping the orbit equals mapping the piece
            img = g.image_index(n + 1, int(ent[n + 1, l]))
            if ent[n, l + 1] != UNFILLED and img != ent[n, l + 1]:
                out.append(
                    Violation("coherence", tx.label, (n, l + 1), f"image {img} != {ent[n, l + 1]}")
                )


def _check_t1(tx: Tableau, out: list[Violation]) -> None:
    """A critical position propagates to every shallower row of its
    column."""
    for ci in tx.crit_ids:
        pos = tx.positions(ci)
        for n in range(1, tx.N + 1):
            for l in range(1, tx.N + 1 - n):
                if pos[n, l] and tx.filled(n - 1, l) and not pos[n - 1, l]:
                    out.append(Violation("T1", tx.label, (n, l), f"crit {ci} broken above"))


def _check_t2(tx: Tableau, crit_txs: dict[int, Tableau], out: list[Violation]) -> None:
    """Below a critical position the tableau copies the critical's own
    tableau: position at (n, l) forces ent(i, l+j) = T(c)(i, j) for
    i + j <= n."""
    for ci in tx.crit_ids:
        if ci not in crit_txs:
            continue
        pos = tx.positions(ci)
        ct = crit_txs[ci].entries
        for n in range(tx.N + 1):
            for l in range(1, tx.N + 1 - n):
                if not pos[n, l]:
                    continue
                for i in range(n + 1):
                    for j in range(n + 1 - i):
                        if tx.entries[i, l + j] == UNFILLED or ct[i, j] == UNFILLED:
                            continue
                        if tx.entries[i, l + j] != ct[i, j]:
                            out.append(
                                Violation(
                                    "T2",
                                    tx.label,
                                    (n, l),
                                    f"copy of crit {ci} differs at ({i},{j})",
                                )
                            )


def _check_t3(tx: Tableau, crit_txs: dict[int, Tableau], out: list[Violation]) -> None:
    """The diagonal exclusion rule.

    With (a) a c1-position at (n+1-l, l) in T(c) whose first l
    diagonal steps cross no critical piece, and (b) a c-position at
    (n, m) in T(x) that does not extend to (n+1, m), the entry at
    (n+1-l, m+l) of T(x) must differ from c1's piece.
    """
    any_crit = {ci: crit_txs[ci].any_critical_mask() for ci in crit_txs}
    for ci in tx.crit_ids:
        if ci not in crit_txs:
            continue
        ct = crit_txs[ci]
        pos_x = tx.positions(ci)
        for c1 in ct.crit_ids:
            pos_c1 = ct.positions(c1)
            acm = any_crit[ci]
            for n in range(1, tx.N):
                for l in range(0, n + 1):
                    r = n + 1 - l
                    if r < 0 or r + l > ct.N or not pos_c1[r, l]:
                        continue
                    if any(acm[n - i, i] for i in range(1, l)):
                        continue
                    for m in range(1, tx.N - n):
                        if not pos_x[n, m]:
                            continue
                        if not tx.filled(n + 1, m) or pos_x[n + 1, m]:
                            continue
                        if r + (m + l) > tx.N or not tx.filled(r, m + l):
                            continue
                        if tx.is_position(r, m + l, c1):
                            out.append(
                                Violation(
                                    "T3",
                                    tx.label,
                                    (r, m + l),
                                    f"forbidden crit {c1} position via (n={n}, m={m}, l={l})",
                                )
                            )


def check_rules(tableaux, crit_tableaux) -> list[Violation]:
    """All rule violations across the given tableaux.

    ``crit_tableaux`` maps graph critical indices to their tableaux;
    every tableau is checked for the entry invariants and the three
    admissibility rules, and each critical tableau additionally for
    the column-0 identity.
    """
    out: list[Violation] = []
    crit_txs = dict(crit_tableaux)
    for ci, ct in crit_txs.items():
        j = ct.crit_ids.index(ci)
        want = ct.crit_cols[j]
        got = ct.entries[:, 0]
        bad = np.flatnonzero((got != want) & (got != UNFILLED))
        for n in bad:
            out.append(
                Violation("column0", ct.label, (int(n), 0), f"{got[n]} != crit piece {want[n]}")
            )
    for tx in list(tableaux) + list(crit_txs.values()):
        _check_entry_invariants(tx, out)
        _check_t1(tx, out)
        _check_t2(tx, crit_txs, out)
        _check_t3(tx, crit_txs, out)
    return out


def corrupt_entry(tx: Tableau, rng: np.random.Generator) -> Tableau | None:
    """Copy of ``tx`` with one random filled entry at column l >= 1
    replaced by a different valid index at that depth.

    Returns None when no entry is corruptible (every depth with filled
    l >= 1 entries carries a single piece).  Column-0 entries are
    excluded: a same-parent same-image twin there is combinatorially
    indistinguishable, so corruption is not detectable by rule checks.
    """
    cand = [
        (n, l)
        for n in range(tx.N + 1)
        for l in range(1, tx.N + 1 - n)
        if tx.filled(n, l) and tx.graph.n_pieces(n) > 1
    ]
    if not cand:
        return None
    n, l = cand[int(rng.integers(len(cand)))]
    new = Tableau(tx.graph, tx.label + "+mut", tx.start, tx.N)
    new.entries = tx.entries.copy()
    new.width = tx.width
    cur = int(new.entries[n, l])
    others = [i for i in range(tx.graph.n_pieces(n)) if i != cur]
    new.entries[n, l] = others[int(rng.integers(len(others)))]
    return new


# ---------------------------------------------------------------------------
# accumulation, children, classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Accumulation:
    """Row-scan result for c -> c' on one tableau."""

    ok: bool
    horizon: int
    first_miss: int | None
    miss_columns: int


def accumulates(tx: Tableau, ci: int) -> Accumulation:
    """Does the tableau's orbit combinatorially accumulate on critical
    ``ci``: every row n has a later column hitting c's depth-n piece.

    Rows whose remaining width falls under _EMPTY_ROW_MIN_WIDTH are not
    scanned; a miss there would be a horizon artifact, not evidence.
    ``horizon`` is the last row of the verified all-hit prefix and
    ``miss_columns`` reports how many columns backed the first miss."""
    pos = tx.positions(ci)
    N = tx.N
    first_miss = None
    last_checked = -1
    for n in range(N):
        if N - n < _EMPTY_ROW_MIN_WIDTH:
            break
        if not pos[n, 1 : N + 1 - n].any():
            first_miss = n
            break
        last_checked = n
    if first_miss is None:
        return Accumulation(True, last_checked, None, 0)
    return Accumulation(False, first_miss - 1, first_miss, N - first_miss)


def orbit_classes(crit_txs: dict[int, Tableau]) -> dict:
    """F(c), [c] and the transitivity audit over the critical tableaux.

    Returns {"F": {ci: set}, "cls": {ci: set}, "transitivity": [...]}
    where transitivity lists (x, y, z) triples with x -> y -> z but not
    x -> z (horizon artifacts; empty on sound data)."""
    ids = sorted(crit_txs)
    arrow = {ci: set() for ci in ids}
    for ci in ids:
        for cj in ids:
            if accumulates(crit_txs[ci], cj).ok:
                arrow[ci].add(cj)
    breaks = []
    for x in ids:
        for y in arrow[x]:
            for z in arrow[y]:
                if z not in arrow[x]:
                    breaks.append((x, y, z))
    cls = {ci: {cj for cj in arrow[ci] if ci in arrow[cj]} for ci in ids}
    return {"F": arrow, "cls": cls, "transitivity": breaks}


def children(
    g: PuzzleGraph, crit_txs: dict[int, Tableau], ci: int, n: int, horizon: int | None = None
) -> list[tuple[PieceId, int]]:
    """Children of the depth-n piece of critical ``ci``.

    A child is a critical pull-back P_{n+k}(c') for c' in [ci] whose
    tableau shows a ci-position at (n, k) with no critical positions on
    the diagonal strictly between, making the intermediate map
    conformal.  Ordered by (k, piece index).
    """
    classes = orbit_classes(crit_txs)["cls"]
    cls = classes.get(ci, {ci})
    out = []
    for cp in sorted(cls):
        tx = crit_txs[cp]
        if horizon is None:
            hor = tx.N
        else:
            hor = min(horizon, tx.N)
        pos = tx.positions(ci)
        anyc = tx.any_critical_mask()
        for k in range(1, hor - n + 1):
            if not pos[n, k]:
                continue
            if any(anyc[n + j, k - j] for j in range(1, k)):
                continue
            pid = PieceId(n + k, tx.entry(n + k, 0))
            out.append((pid, k, cp))
    out.sort(key=lambda t: (t[1], t[0].index))
    return [(pid, k) for pid, k, _ in out]


def _periodic_period(tx: Tableau, ci: int) -> int | None:
    """Minimal k <= N/2 with ci-positions along the whole column k."""
    pos = tx.positions(ci)
    N = tx.N
    for k in range(1, N // 2 + 1):
        if all(pos[n, k] for n in range(N + 1 - k)):
            return k
    return None


def _noncritical_row(tx: Tableau) -> int | None:
    anyc = tx.any_critical_mask()
    N = tx.N
    for n in range(N):
        width = N - n
        if width < _EMPTY_ROW_MIN_WIDTH:
            break
        if not anyc[n, 1 : width + 1].any():
            return n
    return None


def _recurrence_kind(crit_txs: dict[int, Tableau], ci: int, horizon: int) -> tuple[str, dict]:
    """Stabilization test for persistent vs reluctant at one horizon."""
    g = crit_txs[ci].graph
    classes = orbit_classes(crit_txs)["cls"]
    cls = sorted(classes.get(ci, {ci}))
    rows = list(range(1, max(2, horizon // 3) + 1))
    detail = {}
    kinds = []
    for c1 in cls:
        for n in rows:
            kids = children(g, crit_txs, c1, n, horizon=horizon)
            if not kids:
                kinds.append("undecided")
                detail[f"c{c1}-row{n}"] = {"children": 0}
                continue
            last_k = max(k for _, k in kids)
            window = horizon - n
            stable = last_k <= _STABLE_FRACTION * window
            kinds.append("persistent" if stable else "reluctant")
            detail[f"c{c1}-row{n}"] = {
                "children": len(kids),
                "last_k": last_k,
                "window": window,
            }
    if not kinds or "undecided" in kinds:
        return "undecided", detail
    if all(k == "persistent" for k in kinds):
        return "persistent", detail
    if any(k == "reluctant" for k in kinds):
        return "reluctant", detail
    return "undecided", detail


def classify(ci: int, crit_txs: dict[int, Tableau]) -> CriticalClass:
    """Horizon-relative class of bounded critical ``ci``.

    Periodicity and non-criticality are positive detections; the two
    recurrent classes additionally require agreement between the full
    horizon and the half horizon before being emitted.
    """
    tx = crit_txs[ci]
    N = tx.N
    k = _periodic_period(tx, ci)
    if k is not None:
        return CriticalClass("periodic", N, period=k)
    row = _noncritical_row(tx)
    if row is not None:
        return CriticalClass("non_critical", N, row=row)
    acc = accumulates(tx, ci)
    if not acc.ok:
        return CriticalClass(
            "undecided",
            N,
            detail={"reason": "row miss too close to horizon", "first_miss": acc.first_miss},
        )
    kind_full, detail_full = _recurrence_kind(crit_txs, ci, N)
    kind_half, _ = _recurrence_kind(crit_txs, ci, N // 2)
    if kind_full == kind_half and kind_full in ("persistent", "reluctant"):
        cc = orbit_classes(crit_txs)
        detail_full["F"] = sorted(cc["F"][ci])
        detail_full["class"] = sorted(cc["cls"][ci])
        return CriticalClass(kind_full, N, detail=detail_full)
    return CriticalClass(
        "undecided", N, detail={"full": kind_full, "half": kind_half, **detail_full}
    )


def first_row_conflicts(crit_txs: dict[int, Tableau]) -> list[tuple[int, int, int]]:
    """(ci, cj, column) triples where row 0 of T(ci) hits cj's piece but
    ci does not accumulate on cj; the scale normalisation requires r0
    small enough that these vanish."""
    out = []
    ids = sorted(crit_txs)
    arrows = orbit_classes(crit_txs)["F"]
    for ci in ids:
        tx = crit_txs[ci]
        for cj in tx.crit_ids:
            if cj in arrows.get(ci, set()):
                continue
            pos = tx.positions(cj)
            for l in range(1, tx.N + 1):
                if pos[0, l]:
                    out.append((ci, cj, l))
    return out
