from dataclasses import replace
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvauction.clearing import observed_outcomes
from pvauction.metrics import (
    AuctionMetrics,
    MetricsError,
    duration_days,
    pen_dline,
    pen_loc,
    participation_shares,
    programme_aggregates,
    reg,
)
from pvauction.registers import PricingRule
from pvauction.synth import WorldConfig, generate_world

from builders import BidPlan, UnitPlan, analyze, build_registers


def _blank(a: int) -> AuctionMetrics:
    return AuctionMetrics(
        auction_index=a, awarded_capacity_kw=0.0, built_capacity_kw=0.0, n_projects=0, n_built=0, n_late=0,
        n_relocated=0, late_capacity_kw=0.0, relocated_capacity_kw=0.0, dur_sum_days=0.0, dur_cap_sum=0.0,
        rr=None, dur_mean_days=None, dur_capacity_weighted_days=None, bl=None, lchg=None, bl_capacity=None,
        lchg_capacity=None, bcr=None, pvc6=None, net_vs_full_gap=None,
    )


def counts_only(a, n_built, n_rel, n_late):
    return replace(_blank(a), n_built=n_built, n_relocated=n_rel, n_late=n_late,
                   bl=n_late / n_built, lchg=n_rel / n_built)


# -- project indicators ------------------------------------------------------------


def test_duration_example():
    assert duration_days(date(2015, 4, 15), date(2016, 10, 8)) == 542


def test_penalty_indicators():
    deadline = date(2016, 10, 28)
    assert pen_dline(date(2016, 11, 28), deadline) == 1  # 19 months after the final announcement
    assert pen_dline(deadline, deadline) == 0
    assert pen_dline(None, deadline) == 0
    assert pen_loc("80331", "80999") == 1 and pen_loc("80331", "80331") == 0 and pen_loc("80331", None) == 0


def test_region_indicator():
    assert reg("Bavaria") == 1
    assert reg("Brandenburg") == 0
    assert reg(None) is None


def test_pipeline_indicators_from_registers():
    regs = build_registers({1: [
        BidPlan(6.0, [UnitPlan(2000.0, late=True), UnitPlan(2000.0, relocated=True, state="Brandenburg")]),
        BidPlan(6.5, [UnitPlan(3000.0, registered=False)], capacity_kw=3000.0),
    ]})
    an = analyze(regs)
    moved, late, missing = an.outcomes  # fan-out follows commissioning date
    assert (late.status, late.pen_dline, late.pen_loc, late.reg) == (1, 1, 0, 1)
    assert late.dur_days == 600
    assert (moved.status, moved.pen_dline, moved.pen_loc, moved.reg) == (1, 0, 1, 0)
    assert (missing.status, missing.dur_days, missing.reg) == (0, None, None)
    (m,) = an.metrics
    assert m.rr == pytest.approx(4000 / 7000) and m.bl == 0.5 and m.lchg == 0.5
    assert m.dur_mean_days == pytest.approx((600 + 301) / 2)


# -- per-auction metrics --------------------------------------------------------------


def test_au1_penalty_shares_round_to_published_percentages():
    m = counts_only(1, 37, 25, 20)
    assert round(100 * m.lchg) == 68
    assert round(100 * m.bl) == 54


def test_bid_to_cover_800_over_200():
    plans = [BidPlan(5.0 + 0.1 * k, [UnitPlan(1000.0)]) for k in range(8)]
    regs = build_registers({1: plans}, tc=2000.0)
    (m,) = analyze(regs).metrics
    assert m.bcr == 4.0
    assert m.rr == 1.0


def test_marginal_gap_by_pricing_rule():
    plans = [BidPlan(p, [UnitPlan(1500.0)]) for p in (7.6, 8.0, 8.3, 8.49)]
    pab = analyze(build_registers({1: plans}))
    assert sorted(o.bmg for o in pab.outcomes) == [0.0, pytest.approx(0.19), pytest.approx(0.49),
                                                   pytest.approx(0.89)]
    up_plans = [replace(p, paid=8.49) for p in plans]
    up = analyze(build_registers({1: up_plans}, rules={1: PricingRule.UNIFORM_PRICE}))
    assert {o.bmg for o in up.outcomes} == {0.0}
    assert not any(o.in_bid_sample for o in up.outcomes)


# -- pooling -------------------------------------------------------------------------

# built / relocated / late counts per auction for a twelve-auction programme
POOLED_BUILT = [37, 41, 41, 30, 27, 49, 66, 42, 19, 21, 23, 26]
POOLED_RELOCATED = [25, 28, 13, 8, 13, 26, 38, 17, 4, 9, 7, 7]
POOLED_LATE = [20, 16, 14, 8, 8, 18, 15, 8, 2, 2, 1, 2]


def pooled_metrics():
    return [counts_only(a, b, r, late) for a, (b, r, late)
            in enumerate(zip(POOLED_BUILT, POOLED_RELOCATED, POOLED_LATE), start=1)]


def test_pooled_penalty_shares_are_count_weighted():
    early, late, every = programme_aggregates(pooled_metrics())
    assert every.n_built == 422
    assert round(100 * every.lchg) == 46 and round(100 * every.bl) == 27
    assert round(100 * early.lchg) == 50 and round(100 * early.bl) == 32
    assert late.n_auctions == 4
    # averaging the per-auction percentages instead gives a different number
    naive = sum(m.lchg for m in pooled_metrics()) / 12
    assert round(100 * naive) != round(100 * every.lchg)


def test_pooled_late_share_with_published_late_counts():
    late = [20, 16, 14, 8, 8, 18, 15, 8, 3, 4, 3, 3]
    ms = [counts_only(a, b, 0, n) for a, (b, n) in enumerate(zip(POOLED_BUILT, late), start=1)]
    (row,) = programme_aggregates(ms, [("all", 1, 12)])
    assert sum(late) == 120 and round(100 * row.bl) == 28


def test_singleton_range_equals_auction():
    ms = pooled_metrics()
    (row,) = programme_aggregates(ms, [("AU3", 3, 3)])
    assert row.lchg == ms[2].lchg and row.bl == ms[2].bl and row.n_built == ms[2].n_built


def test_empty_range_is_an_error():
    with pytest.raises(MetricsError, match="no auctions"):
        programme_aggregates(pooled_metrics(), [("none", 20, 30)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 60), st.integers(0, 60), st.integers(0, 60)), min_size=1, max_size=12))
def test_pooled_share_lies_between_extremes(rows):
    ms = [counts_only(a, b, min(r, b), min(n, b)) for a, (b, r, n) in enumerate(rows, start=1)]
    (row,) = programme_aggregates(ms, [("all", 1, len(ms))])
    assert min(m.lchg for m in ms) - 1e-12 <= row.lchg <= max(m.lchg for m in ms) + 1e-12
    assert row.bl == pytest.approx(sum(m.n_late for m in ms) / sum(m.n_built for m in ms))


# -- synthetic-world checks against ground truth ----------------------------------------


@pytest.fixture(scope="module")
def world():
    return generate_world(WorldConfig(seed=7))


@pytest.fixture(scope="module")
def world_analysis(world):
    return analyze(world.registers())


def test_ratios_match_ground_truth_enumeration(world, world_analysis):
    for m in world_analysis.metrics:
        truth = [p for p in world.truth.projects if p.auction_index == m.auction_index]
        built = [p for p in truth if p.built]
        cap = sum(p.capacity_kw for p in built)
        awarded = sum(p.capacity_kw for p in truth)
        assert m.n_built == len(built)
        assert m.rr == pytest.approx(cap / awarded, abs=1e-12)
        assert m.lchg == pytest.approx(sum(p.relocated for p in built) / len(built), abs=1e-12)
        assert m.bl == pytest.approx(sum(p.late for p in built) / len(built), abs=1e-12)
        assert m.dur_mean_days == pytest.approx(sum(p.duration_days for p in built) / len(built), abs=1e-9)


def test_experience_is_monotone(world_analysis):
    seen: dict[str, int] = {}
    for o in sorted(world_analysis.outcomes, key=lambda o: o.auction_index):
        if seen.get(o.developer_key):
            assert o.exp == 1
        if o.exp:
            seen[o.developer_key] = 1
        assert o.new_dev == 1 - o.exp


def test_small_developer_flag_is_auction_invariant(world_analysis):
    flags: dict[str, set] = {}
    for o in world_analysis.outcomes:
        flags.setdefault(o.developer_key, set()).add(o.small_dev)
    assert all(len(v) == 1 for v in flags.values())


def test_marginal_gap_sign(world, world_analysis):
    up = {a for a, s in world.results.specs.items() if s.pricing_rule is PricingRule.UNIFORM_PRICE}
    gaps = [o for o in world_analysis.outcomes if o.bmg is not None]
    assert gaps
    for o in gaps:
        if o.auction_index in up:
            assert o.bmg == 0
        else:
            assert o.bmg >= 0


def test_participation_shares_are_fractions(world_analysis):
    for row in participation_shares(world_analysis.outcomes):
        assert 0 <= row["new_share"] <= 1 and 0 <= row["small_share"] <= 1
    first = participation_shares(world_analysis.outcomes)[0]
    assert first["new_share"] == 1.0  # nobody has won before the first auction


def test_planted_group_realisation_rates_recovered():
    planted = {a: 0.03 for a in range(1, 9)} | {a: 0.44 for a in range(9, 13)}
    w = generate_world(WorldConfig(seed=11, cancel_by_auction=planted))
    early, late, _ = programme_aggregates(analyze(w.registers()).metrics)
    for row, lo, hi in ((early, 1, 8), (late, 9, 12)):
        truth = [p for p in w.truth.projects if lo <= p.auction_index <= hi]
        expect = sum(p.capacity_kw for p in truth if p.built) / sum(p.capacity_kw for p in truth)
        assert row.rr == pytest.approx(expect, abs=1e-12)
    assert abs(early.rr - 0.97) < 0.05 and abs(late.rr - 0.56) < 0.12
