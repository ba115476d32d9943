"""Tests for the tableau layer: rule soundness, mutation detection,
accumulation, children, and horizon-relative classification.

Soundness is checked on honestly computed tableaux (critical orbits and
backward-orbit samples of the filled-in set), where every rule must hold
with zero violations; detectability is checked on single-entry mutations,
each of which must trip at least one rule.
"""
import numpy as np
import pytest

from juliacantor import corpus
from juliacantor.puzzle import build_puzzle, choose_r0
from juliacantor.tableau import (
    accumulates,
    check_rules,
    children,
    classify,
    corrupt_entry,
    critical_tableau,
    first_row_conflicts,
    orbit_classes,
    sample_kf_points,
    tableau,
)

DEPTH = 10
KF_SAMPLES = 6
MUTATIONS = 40
SEED = 20240817


def _graph(entry, depth=DEPTH):
    r0 = entry.r0 if entry.r0 is not None else choose_r0(entry.polynomial).value
    return build_puzzle(entry.polynomial, r0, depth)


@pytest.fixture(scope="module")
def square_graph():
    return _graph(corpus.square())


@pytest.fixture(scope="module")
def basilica_graph():
    return _graph(corpus.basilica_escape())


@pytest.fixture(scope="module")
def golden_graph():
    return _graph(corpus.golden_cubic())


@pytest.fixture(scope="module")
def swap_graph():
    return _graph(corpus.swap_cubic())


@pytest.fixture(scope="module")
def landing_graph():
    return _graph(corpus.landing_cubic())


def _crit_txs(g):
    return {
        ci: critical_tableau(g, ci)
        for ci, c in enumerate(g.criticals)
        if c.orbit_status == "bounded"
    }


class TestRuleSoundness:
    @pytest.mark.parametrize(
        "gname",
        ["square_graph", "golden_graph", "swap_graph", "landing_graph"],
    )
    def test_critical_tableaux_clean(self, gname, request):
        g = request.getfixturevalue(gname)
        crit_txs = _crit_txs(g)
        assert crit_txs, "corpus entry should have a bounded critical"
        vio = check_rules([], crit_txs)
        assert vio == [], vio[:5]

    @pytest.mark.parametrize(
        "gname",
        ["square_graph", "basilica_graph", "golden_graph", "landing_graph"],
    )
    def test_filled_set_samples_clean(self, gname, request):
        g = request.getfixturevalue(gname)
        crit_txs = _crit_txs(g)
        pts = sample_kf_points(g, KF_SAMPLES, seed=SEED)
        txs = [tableau(g, z, label=f"kf{i}") for i, z in enumerate(pts)]
        # backward orbits stay in the filled-in set; columns may still
        # truncate where the orbit grazes an uncertain raster band, but
        # at least one sample should survive to full width
        widths = [tx.width for tx in txs]
        assert max(widths) == DEPTH + 1
        assert min(widths) >= 2
        vio = check_rules(txs, crit_txs)
        assert vio == [], vio[:5]

    def test_escaping_orbit_truncates_cleanly(self, basilica_graph):
        """A point with small positive Green value fills a partial
        triangle that still satisfies every rule."""
        tx = tableau(basilica_graph, 3.001, label="outer")
        assert tx.filled(0, 0)
        assert tx.width < tx.N + 1
        assert check_rules([tx], _crit_txs(basilica_graph)) == []

    def test_critical_tableau_requires_bounded(self, basilica_graph):
        with pytest.raises(ValueError):
            critical_tableau(basilica_graph, 0)


class TestMutationDetection:
    @pytest.mark.parametrize("gname", ["golden_graph", "landing_graph"])
    def test_single_entry_mutations_detected(self, gname, request):
        g = request.getfixturevalue(gname)
        crit_txs = _crit_txs(g)
        base = next(iter(crit_txs.values()))
        rng = np.random.default_rng(SEED)
        caught = 0
        total = 0
        for _ in range(MUTATIONS):
            mut = corrupt_entry(base, rng)
            if mut is None:
                continue
            total += 1
            if check_rules([mut], crit_txs):
                caught += 1
        assert total == MUTATIONS
        assert caught == total

    def test_single_piece_tower_has_nothing_to_corrupt(self, square_graph):
        crit_txs = _crit_txs(square_graph)
        base = next(iter(crit_txs.values()))
        rng = np.random.default_rng(SEED)
        assert corrupt_entry(base, rng) is None


class TestAccumulation:
    def test_periodic_critical_accumulates_on_itself(self, golden_graph):
        crit_txs = _crit_txs(golden_graph)
        ci = next(iter(crit_txs))
        acc = accumulates(crit_txs[ci], ci)
        assert acc.ok
        assert acc.first_miss is None

    def test_non_returning_critical_misses_early(self, landing_graph):
        crit_txs = _crit_txs(landing_graph)
        ci = next(iter(crit_txs))
        acc = accumulates(crit_txs[ci], ci)
        assert not acc.ok
        assert acc.first_miss == 1

    def test_orbit_classes_transitive(self, swap_graph):
        out = orbit_classes(_crit_txs(swap_graph))
        assert out["transitivity"] == []


class TestChildren:
    def test_periodic_column_yields_unit_children(self, golden_graph):
        g = golden_graph
        crit_txs = _crit_txs(g)
        ci = next(iter(crit_txs))
        for n in (1, 2, 3):
            kids = children(g, crit_txs, ci, n)
            assert kids, f"row {n} should have children"
            assert kids[0][1] == 1
            assert kids[0][0].depth == n + 1

    @pytest.mark.parametrize("gname", ["golden_graph", "swap_graph"])
    def test_children_consistent_with_graph_maps(self, gname, request):
        """Independent oracle: each child piece must map onto the
        critical's depth-n piece under f^k with no bounded critical on
        the strict intermediate pieces."""
        g = request.getfixturevalue(gname)
        crit_txs = _crit_txs(g)
        ci = next(iter(crit_txs))
        bounded = list(crit_txs)
        for n in (1, 2):
            for pid, k in children(g, crit_txs, ci, n):
                depth, idx = pid.depth, pid.index
                for j in range(k):
                    if 0 < j:
                        crit_here = [
                            cj
                            for cj in bounded
                            if g.critical_piece_index(depth, cj) == idx
                        ]
                        assert crit_here == [], (pid, k, j)
                    idx = g.image_index(depth, idx)
                    depth -= 1
                assert depth == n
                assert idx == g.critical_piece_index(n, ci)


class TestClassification:
    def test_square_periodic(self, square_graph):
        crit_txs = _crit_txs(square_graph)
        out = classify(next(iter(crit_txs)), crit_txs)
        assert (out.kind, out.period) == ("periodic", 1)

    def test_tight_two_cycle_has_period_one_component(self, golden_graph):
        crit_txs = _crit_txs(golden_graph)
        out = classify(next(iter(crit_txs)), crit_txs)
        assert (out.kind, out.period) == ("periodic", 1)

    def test_split_two_cycle_has_period_two(self, swap_graph):
        crit_txs = _crit_txs(swap_graph)
        out = classify(next(iter(crit_txs)), crit_txs)
        assert (out.kind, out.period) == ("periodic", 2)

    def test_landing_orbit_is_non_critical(self, landing_graph):
        crit_txs = _crit_txs(landing_graph)
        out = classify(next(iter(crit_txs)), crit_txs)
        assert out.kind == "non_critical"
        assert out.row == 1

    def test_horizon_recorded(self, landing_graph):
        crit_txs = _crit_txs(landing_graph)
        out = classify(next(iter(crit_txs)), crit_txs)
        assert out.horizon == DEPTH


class TestScaleNormalisation:
    @pytest.mark.parametrize("gname", ["golden_graph", "swap_graph"])
    def test_no_first_row_conflicts_at_default_scale(self, gname, request):
        g = request.getfixturevalue(gname)
        assert first_row_conflicts(_crit_txs(g)) == []

    def test_halving_scale_clears_landing_conflicts(self, landing_graph):
        """At the default scale the landing orbit re-enters the critical
        depth-0 piece without accumulating; one halving separates the
        landing point from the critical at depth 0."""
        conf = first_row_conflicts(_crit_txs(landing_graph))
        assert conf, "expected conflicts at the default scale"
        assert all(ci == cj for ci, cj, _ in conf)
        entry = corpus.landing_cubic()
        g2 = build_puzzle(entry.polynomial, entry.r0 / 2, 6)
        assert first_row_conflicts(_crit_txs(g2)) == []


class TestRendering:
    def test_rows_shape_and_marks(self, golden_graph):
        crit_txs = _crit_txs(golden_graph)
        tx = next(iter(crit_txs.values()))
        rows = tx.to_rows()
        assert len(rows) == tx.N + 1
        assert "*" in rows[0]
        assert rows[-1].strip() != ""
