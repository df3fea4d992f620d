"""Summability search, layered lower-bound network, incentive brute force."""

import pytest

from costshare import corpus
from costshare.analysis import (
    build_lower_bound,
    check_gsp,
    check_strategyproof,
    default_bid_grid,
    predicted_m,
    random_order_expected_summability,
    select_good_groups,
    summability_for,
    worst_summability,
)
from costshare.core import (
    CapacityError,
    InvalidInputError,
    MechanismOutcome,
    harmonic,
    iter_bits,
)
from costshare.facloc import fl_oracle, pt_method
from costshare.moulin import run_moulin
from costshare.steiner import jv_method, steiner_oracle


# ---------------------------------------------------------------------------
# summability

def test_summability_for_colocated_is_harmonic():
    inst = corpus.colocated_facility(3)
    report = summability_for(pt_method(inst), fl_oracle(inst), (0, 1, 2), (2, 0, 1))
    assert report.value == pytest.approx(harmonic(3), abs=1e-9)
    assert report.ratio == pytest.approx(harmonic(3), abs=1e-9)


def test_summability_for_singleton_budget_balanced():
    inst = corpus.two_distance_facility()
    report = summability_for(pt_method(inst), fl_oracle(inst), (0,), (0,))
    assert report.value == pytest.approx(1.2)  # f + d = stand-alone cost
    assert report.ratio <= 1.0 + 1e-9


def test_summability_for_jv_colocated_pair():
    inst = corpus.colocated_steiner(2, 1.0)
    report = summability_for(jv_method(inst), steiner_oracle(inst), (0, 1), (0, 1))
    assert report.value == pytest.approx(1.5)
    assert report.ratio == pytest.approx(1.5)


def test_summability_for_rejects_non_permutation():
    inst = corpus.colocated_facility(3)
    with pytest.raises(InvalidInputError):
        summability_for(pt_method(inst), fl_oracle(inst), (0, 1), (0, 2))


def test_worst_summability_exhaustive_colocated():
    inst = corpus.colocated_facility(4)
    report = worst_summability(pt_method(inst), fl_oracle(inst))
    assert report.ratio == pytest.approx(harmonic(4), abs=1e-9)
    assert report.subset == {0, 1, 2, 3}


def test_worst_summability_mode_ordering(fl_corpus):
    inst = fl_corpus[0]
    method, oracle = pt_method(inst), fl_oracle(inst)
    exhaustive = worst_summability(method, oracle)
    random_search = worst_summability(method, oracle, mode="random", trials=60, seed=4)
    full = tuple(range(inst.n_players))
    fixed = summability_for(method, oracle, full, full)
    assert exhaustive.ratio >= random_search.ratio - 1e-12
    assert random_search.ratio >= fixed.ratio - 1e-12


def test_worst_summability_jv_sanity_floor(steiner_corpus):
    """Budget balance on singletons forces a ratio of at least one half."""
    inst = steiner_corpus[0]
    report = worst_summability(jv_method(inst), steiner_oracle(inst))
    assert report.ratio >= 0.5 - 1e-9


def test_worst_summability_caps_and_modes():
    inst = corpus.colocated_facility(4)
    with pytest.raises(CapacityError):
        worst_summability(pt_method(inst), fl_oracle(inst), cap=3)
    with pytest.raises(InvalidInputError):
        worst_summability(pt_method(inst), fl_oracle(inst), mode="annealed")


def test_random_order_mean_colocated_exact():
    inst = corpus.colocated_facility(6)
    mean, stderr = random_order_expected_summability(
        pt_method(inst), fl_oracle(inst), range(6), trials=40, seed=2
    )
    assert mean == pytest.approx(harmonic(6), abs=1e-9)
    assert stderr == pytest.approx(0.0, abs=1e-9)
    assert mean >= harmonic(6) / 3 - 3 * (stderr + 1e-12)


def test_random_order_mean_singleton():
    inst = corpus.two_distance_facility()
    mean, _ = random_order_expected_summability(
        pt_method(inst), fl_oracle(inst), (1,), trials=5, seed=0
    )
    assert mean == pytest.approx(1.0)  # share equals stand-alone cost


# ---------------------------------------------------------------------------
# layered construction

def test_build_lower_bound_k4_counts():
    c = build_lower_bound(4, beta=2.0, m_override=3)
    assert c.p == 1 and c.sqrt_k == 2
    assert c.instance.n_players == 8  # 2 at the base vertex + 2 on each of 3 paths
    assert [len(v) for v in c.level_vertices] == [2, 3]
    assert [len(e) for e in c.level_edges] == [1, 6]
    assert c.edge_cost(1) == pytest.approx(0.5)
    assert all(cst == pytest.approx(0.5) for _, _, cst in c.instance.edges)


def test_build_lower_bound_level_structure():
    c = build_lower_bound(16, beta=2.0, m_override=2)
    assert c.p == 2
    for j in range(1, c.p + 1):
        assert len(c.level_edges[j]) == 2 * c.m * len(c.level_edges[j - 1])
        for groups in c.groups_at(j):
            assert len(groups) == c.m
            for _, players in groups:
                assert len(players) == c.sqrt_k
    # two-hop refinement preserves distances: base vertex stays at distance 1
    assert c.instance.dist[0][1] == pytest.approx(1.0)


def test_build_lower_bound_rejects_bad_k():
    for bad in (2, 8, 12, 15):
        with pytest.raises(InvalidInputError):
            build_lower_bound(bad, beta=2.0, m_override=2)


def test_build_lower_bound_analysis_scale_m_needs_override():
    assert predicted_m(16, 2.0) == 16384
    with pytest.raises(CapacityError, match="16384"):
        build_lower_bound(16, beta=2.0)


def test_select_good_groups_jv_k4():
    c = build_lower_bound(4, beta=2.0, m_override=3)
    selection = select_good_groups(c, jv_method(c.instance), steiner_oracle(c.instance))
    assert selection.complete and selection.all_groups_good
    assert len(selection.selected) == 4
    assert selection.level_sizes_ok
    assert all(cost == pytest.approx(1.0, abs=1e-9) for cost in selection.level_costs)
    assert selection.prefix_sum >= selection.target_bound - 1e-6


def test_select_good_groups_jv_k16():
    c = build_lower_bound(16, beta=2.0, m_override=3)
    selection = select_good_groups(c, jv_method(c.instance), steiner_oracle(c.instance))
    assert selection.complete and selection.all_groups_good
    assert len(selection.selected) == 16
    assert selection.level_sizes_ok
    assert all(cost == pytest.approx(1.0, abs=1e-9) for cost in selection.level_costs)
    assert selection.prefix_sum >= selection.target_bound - 1e-6
    sizes = {}
    for audit in selection.audits:
        if audit.good and audit.level > 0:
            sizes[audit.level] = sizes.get(audit.level, 0)
    active = [s for s in selection.edge_status if s.active]
    assert [s.level for s in active] == [1, 2, 2]


def test_select_good_groups_reports_failures_for_stingy_method():
    """A method paying nothing can never clear the thresholds; the selection
    reports per-edge failures instead of raising."""
    from costshare.core import CostShareMethod

    c = build_lower_bound(4, beta=2.0, m_override=2)
    zero = CostShareMethod("zero", c.instance.n_players,
                           lambda m: {i: 0.0 for i in iter_bits(m)})
    selection = select_good_groups(c, zero, steiner_oracle(c.instance))
    assert not selection.complete
    assert any(s.active and s.chosen_group is None for s in selection.edge_status)
    assert selection.prefix_sum is None


# ---------------------------------------------------------------------------
# incentive checks

def test_default_bid_grid():
    grid = default_bid_grid(1.0)
    assert len(grid) == 9 and grid[0] == 0.0 and grid[-1] == 2.0
    grid = default_bid_grid(1.0, eps_step=1e-6)
    assert 1.0 - 1e-6 in grid and 1.0 + 1e-6 in grid


def test_checker_flags_pay_your_bid_mechanism():
    """Serving everyone at their bid price is dominated by shading the bid."""

    def rigged(bids):
        return MechanismOutcome(
            served=frozenset(range(2)), prices=tuple(bids), incurred_cost=0.0
        )

    violations = check_strategyproof(rigged, (1.0, 1.0))
    assert violations
    assert all(len(v.coalition) == 1 for v in violations)


def test_moulin_pt_strategyproof_on_grid():
    inst = corpus.colocated_facility(3)
    method, oracle = pt_method(inst), fl_oracle(inst)
    runner = lambda bids: run_moulin(method, oracle, bids)
    assert check_strategyproof(runner, (0.5, 0.35, 0.3)) == []


def test_moulin_pt_gsp_four_players_pair_coalitions():
    inst = corpus.colocated_facility(4)
    method, oracle = pt_method(inst), fl_oracle(inst)
    runner = lambda bids: run_moulin(method, oracle, bids)
    assert check_gsp(runner, (0.5, 0.3, 0.27, 0.2), max_coalition=2) == []


def test_gsp_with_singleton_coalitions_matches_sp():
    inst = corpus.colocated_facility(2)
    method, oracle = pt_method(inst), fl_oracle(inst)
    runner = lambda bids: run_moulin(method, oracle, bids)
    vals = (0.8, 0.4)
    sp = check_strategyproof(runner, vals)
    gsp1 = check_gsp(runner, vals, max_coalition=1)
    assert sp == gsp1


def test_weak_gsp_violations_are_a_subset_of_full():
    def rigged(bids):
        return MechanismOutcome(
            served=frozenset(range(2)), prices=tuple(bids), incurred_cost=0.0
        )

    full = check_gsp(rigged, (1.0, 1.0), max_coalition=2)
    weak = check_gsp(rigged, (1.0, 1.0), max_coalition=2, weak=True)
    full_keys = {(v.coalition, v.bids) for v in full}
    assert weak and all((v.coalition, v.bids) in full_keys for v in weak)


def test_full_gsp_on_greedy_cover_recorded_not_asserted():
    """The greedy cover mechanism claims only the weak coalition property;
    full-coalition results are data, not a gate."""
    from costshare.setcover import run_dmv_setcover

    inst = corpus.three_set_cover()
    runner = lambda bids: run_dmv_setcover(inst, bids)
    vals = (0.6, 0.6)
    assert check_gsp(runner, vals, max_coalition=2, weak=True) == []
    full = check_gsp(runner, vals, max_coalition=2)
    assert isinstance(full, list)


def test_checkers_respect_player_cap():
    def noop(bids):
        return MechanismOutcome(frozenset(), tuple(0.0 for _ in bids), 0.0)

    with pytest.raises(CapacityError):
        check_strategyproof(noop, (1.0,) * 6)
