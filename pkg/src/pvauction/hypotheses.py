"""Rank, correlation and regression tests run over project outcomes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .metrics import AuctionMetrics, ProjectOutcome, participation_shares
from .stats import RegressionResult, StatsError, mann_whitney, ols_normalized, pearson_test


@dataclass(frozen=True)
class SuiteConfig:
    duration_auctions: tuple[int, int] = (1, 12)
    bid_auctions: tuple[int, int] = (1, 8)
    min_group_size: int = 2
    alphas: tuple[float, float] = (0.01, 0.05)


@dataclass
class HypothesisEntry:
    hypothesis: str
    description: str
    method: str
    sample: str
    status: str = "Tested"  # or "Untestable"
    statistic: float | None = None
    p_value: float | None = None
    n_a: int | None = None
    n_b: int | None = None
    mean_a: float | None = None
    mean_b: float | None = None
    note: str = ""
    series: list = field(default_factory=list)

    def rejects(self, alpha: float) -> bool | None:
        if self.status != "Tested" or self.p_value is None or math.isnan(self.p_value):
            return None
        return self.p_value < alpha


@dataclass
class SuiteReport:
    entries: list[HypothesisEntry]
    regression: RegressionResult | None = None

    def __getitem__(self, hypothesis: str) -> HypothesisEntry:
        for e in self.entries:
            if e.hypothesis == hypothesis:
                return e
        raise KeyError(hypothesis)


def _in(rng: tuple[int, int], o: ProjectOutcome) -> bool:
    return rng[0] <= o.auction_index <= rng[1]


def _rank_entry(
    hid: str, desc: str, sample_desc: str, outs: Sequence[ProjectOutcome],
    value: Callable[[ProjectOutcome], float | None], group: Callable[[ProjectOutcome], int | None],
    labels: tuple[str, str], cfg: SuiteConfig,
) -> HypothesisEntry:
    a, b = [], []
    for o in outs:
        v, g = value(o), group(o)
        if v is None or g is None:
            continue
        (a if g == 1 else b).append(v)
    entry = HypothesisEntry(hid, desc, "Mann-Whitney-Wilcoxon (two-sided)",
                            f"{sample_desc}; A={labels[0]}, B={labels[1]}", n_a=len(a), n_b=len(b))
    if len(a) < cfg.min_group_size or len(b) < cfg.min_group_size:
        entry.status = "Untestable"
        entry.note = f"group sizes {len(a)}/{len(b)} below {cfg.min_group_size}"
        return entry
    res = mann_whitney(a, b)
    entry.statistic, entry.p_value = res.u_statistic, res.p_value
    entry.mean_a, entry.mean_b = res.mean_a, res.mean_b
    entry.note = res.method
    return entry


def _trend_entry(hid: str, desc: str, shares: list[dict], key: str) -> HypothesisEntry:
    xs = [float(s["auction"]) for s in shares]
    ys = [s[key] for s in shares]
    entry = HypothesisEntry(hid, desc, "Pearson correlation of per-auction share with auction index",
                            "all awarded developers per auction", n_a=len(xs),
                            series=[(s["auction"], s[key]) for s in shares])
    try:
        res = pearson_test(xs, ys)
    except StatsError as exc:
        entry.status, entry.note = "Untestable", str(exc)
        return entry
    entry.statistic, entry.p_value = res.r, res.p_value
    entry.mean_a = sum(ys) / len(ys)
    return entry


def hypothesis_suite(
    outcomes: Sequence[ProjectOutcome],
    metrics: Sequence[AuctionMetrics],
    config: SuiteConfig | None = None,
) -> SuiteReport:
    """Run every test in a fixed order; failing preconditions mark an entry Untestable."""
    cfg = config or SuiteConfig()
    dur_sample = [o for o in outcomes if o.status and _in(cfg.duration_auctions, o)]
    bid_sample = [o for o in outcomes if o.in_bid_sample and o.bv_full is not None and _in(cfg.bid_auctions, o)]
    d_desc = f"built projects AU{cfg.duration_auctions[0]}-AU{cfg.duration_auctions[1]}"
    b_desc = f"bid-value sample AU{cfg.bid_auctions[0]}-AU{cfg.bid_auctions[1]}"

    dur = lambda o: o.dur_days  # noqa: E731
    bv = lambda o: o.bv_full  # noqa: E731
    entries = [
        _rank_entry("H0_5.1", "no difference in duration with vs without location change",
                    d_desc, dur_sample, dur, lambda o: o.pen_loc, ("relocated", "original site"), cfg),
        _rank_entry("H0_5.2", "no difference in subsidy level (marginal-bid gap) with vs without location change",
                    b_desc, bid_sample, lambda o: o.bmg, lambda o: o.pen_loc, ("relocated", "original site"), cfg),
        _rank_entry("H0_5.3", "no difference in duration between south and north",
                    d_desc, dur_sample, dur, lambda o: o.reg, ("south", "north"), cfg),
        _rank_entry("H0_5.4", "no difference in full bid value between south and north",
                    b_desc, bid_sample, bv, lambda o: o.reg, ("south", "north"), cfg),
    ]
    range_outs = [o for o in outcomes if _in(cfg.duration_auctions, o)]
    shares = participation_shares(range_outs)
    entries.append(_trend_entry("H0_6.1", "share of new developers over time", shares, "new_share"))
    entries.append(_trend_entry("H0_6.2", "share of small developers over time", shares, "small_share"))

    corr = HypothesisEntry("H0_6.3", "no correlation between developer size and marginal-bid gap",
                           "Pearson correlation", b_desc)
    pairs = [(o.developer_size_kw, o.bmg) for o in bid_sample if o.bmg is not None]
    corr.n_a = len(pairs)
    try:
        res = pearson_test([p[0] for p in pairs], [p[1] for p in pairs])
        corr.statistic, corr.p_value = res.r, res.p_value
    except StatsError as exc:
        corr.status, corr.note = "Untestable", str(exc)
    entries.append(corr)

    entries.append(_rank_entry("H0_6.4", "no difference in duration between experienced and new developers",
                               d_desc, dur_sample, dur, lambda o: o.exp, ("experienced", "new"), cfg))
    entries.append(_rank_entry("H0_6.5", "no difference in full bid value between experienced and new developers",
                               b_desc, bid_sample, bv, lambda o: o.exp, ("experienced", "new"), cfg))

    reg_entry = HypothesisEntry("H0_7", "bid value on normalised PV cost index (+6 months) and bid-to-cover ratio",
                                "OLS on z-normalised regressors", b_desc)
    by_auction = {m.auction_index: m for m in metrics}
    rows = [(o.bv_full, by_auction[o.auction_index].pvc6, by_auction[o.auction_index].bcr)
            for o in bid_sample if o.auction_index in by_auction]
    rows = [r for r in rows if r[1] is not None and r[2] is not None]
    reg_entry.n_a = len(rows)
    regression = None
    try:
        regression = ols_normalized([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])
        reg_entry.statistic, reg_entry.p_value = regression.f_statistic, regression.f_p_value
        reg_entry.mean_a = regression.coefficients["intercept"]
    except StatsError as exc:
        reg_entry.status, reg_entry.note = "Untestable", str(exc)
    entries.append(reg_entry)
    return SuiteReport(entries, regression)
