"""Project-level indicators and per-auction / programme aggregates."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from datetime import date
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .registers import AuctionSpec, Month, PRICE_DIGITS, PricingRule

if TYPE_CHECKING:  # pragma: no cover
    from .clearing import AwardOutcome
    from .linkage import BidValueEstimate, DeveloperProfile, ProjectRecord

SOUTH = frozenset({
    "Baden-Wuerttemberg", "Bavaria", "Hesse", "Rhineland-Palatinate",
    "Thuringia", "Saarland", "Saxony",
})
NORTH = frozenset({
    "Mecklenburg-Western Pomerania", "Saxony-Anhalt", "Schleswig-Holstein",
    "Brandenburg", "North-Rhine Westphalia", "Lower Saxony",
})

DEFAULT_SMALL_THRESHOLD_KW = 2000.0
PV_INDEX_LAG_MONTHS = 6


class MetricsError(ValueError):
    pass


def duration_days(date_in: date, date_end: date) -> int:
    return (date_end - date_in).days


def pen_dline(date_end: date | None, deadline: date) -> int:
    return int(date_end is not None and date_end > deadline)


def pen_loc(loc_in: str, loc_end: str | None) -> int:
    return int(loc_end is not None and loc_end != loc_in)


def reg(state: str | None) -> int | None:
    """1 for southern states, 0 otherwise; None when there is no final location."""
    if state is None:
        return None
    return int(state in SOUTH)


@dataclass(frozen=True)
class ProjectOutcome:
    project_id: object
    auction_index: int
    developer_key: str
    capacity_kw: float
    status: int
    dur_days: int | None
    pen_dline: int
    pen_loc: int
    reg: int | None
    exp: int
    new_dev: int
    small_dev: int
    developer_size_kw: float
    bv_full: float | None = None
    bv_net: float | None = None
    bmg: float | None = None
    in_bid_sample: bool = False
    reliability: str = ""


def project_outcomes(
    projects: Sequence["ProjectRecord"],
    developers: Mapping[str, "DeveloperProfile"],
    outcomes: Mapping[int, "AwardOutcome"],
    specs: Mapping[int, AuctionSpec],
    estimates: Mapping[object, "BidValueEstimate"] | None = None,
    small_threshold_kw: float = DEFAULT_SMALL_THRESHOLD_KW,
) -> list[ProjectOutcome]:
    estimates = estimates or {}
    out = []
    for p in sorted(projects, key=lambda p: p.project_id):
        spec = specs[p.auction_index]
        dev = developers[p.developer_key]
        exp = int(dev.first_win_auction is not None and dev.first_win_auction < p.auction_index)
        if p.built:
            if p.commissioning_date is None:
                raise MetricsError(f"built project {p.project_id} has no commissioning date")
            dur = duration_days(spec.first_announcement, p.commissioning_date)
        else:
            dur = None
        est = estimates.get(p.project_id)
        bv_full = bv_net = bmg = None
        in_sample = False
        rel = ""
        if est is not None:
            bv_full, bv_net = est.consolidated_full, est.consolidated_net
            in_sample = est.in_bid_sample and bv_full is not None
            rel = est.reliability.value
            mbid = outcomes[p.auction_index].max_awarded_bid
            if bv_full is not None and mbid is not None:
                bmg = round(mbid - bv_full, PRICE_DIGITS)
        out.append(ProjectOutcome(
            project_id=p.project_id,
            auction_index=p.auction_index,
            developer_key=p.developer_key,
            capacity_kw=p.capacity_kw,
            status=int(p.built),
            dur_days=dur,
            pen_dline=pen_dline(p.commissioning_date, spec.deadline_no_reduction) if p.built else 0,
            pen_loc=pen_loc(p.loc_in, p.loc_out) if p.built else 0,
            reg=reg(p.state) if p.built else None,
            exp=exp,
            new_dev=1 - exp,
            small_dev=int(dev.size_kw <= small_threshold_kw),
            developer_size_kw=dev.size_kw,
            bv_full=bv_full,
            bv_net=bv_net,
            bmg=bmg,
            in_bid_sample=in_sample,
            reliability=rel,
        ))
    return out


@dataclass(frozen=True)
class AuctionMetrics:
    auction_index: int
    awarded_capacity_kw: float
    built_capacity_kw: float
    n_projects: int
    n_built: int
    n_late: int
    n_relocated: int
    late_capacity_kw: float
    relocated_capacity_kw: float
    dur_sum_days: float
    dur_cap_sum: float  # sum of capacity * duration
    rr: float | None
    dur_mean_days: float | None
    dur_capacity_weighted_days: float | None
    bl: float | None
    lchg: float | None
    bl_capacity: float | None
    lchg_capacity: float | None
    bcr: float | None
    pvc6: float | None
    net_vs_full_gap: float | None
    n_gap: int = 0
    gap_sum: float = 0.0

    @property
    def label(self) -> str:
        return f"AU{self.auction_index}"

    def as_row(self) -> dict:
        return asdict(self)


def _ratio(num, den):
    return num / den if den else None


def auction_metrics(
    outcomes: Iterable[ProjectOutcome],
    award: "AwardOutcome",
    pv_index: Mapping[Month, float],
    spec: AuctionSpec,
) -> AuctionMetrics:
    outs = [o for o in outcomes if o.auction_index == award.auction_index]
    built = [o for o in outs if o.status]
    cap = sum(o.capacity_kw for o in built)
    gaps = [o.bv_full - o.bv_net for o in outs
            if o.in_bid_sample and o.bv_full is not None and o.bv_net is not None]
    n_built = len(built)
    n_late = sum(o.pen_dline for o in built)
    n_rel = sum(o.pen_loc for o in built)
    late_cap = sum(o.capacity_kw for o in built if o.pen_dline)
    rel_cap = sum(o.capacity_kw for o in built if o.pen_loc)
    dur_sum = float(sum(o.dur_days for o in built))
    dur_cap = float(sum(o.dur_days * o.capacity_kw for o in built))
    ac = award.awarded_capacity_kw
    return AuctionMetrics(
        auction_index=award.auction_index,
        awarded_capacity_kw=ac,
        built_capacity_kw=cap,
        n_projects=len(outs),
        n_built=n_built,
        n_late=n_late,
        n_relocated=n_rel,
        late_capacity_kw=late_cap,
        relocated_capacity_kw=rel_cap,
        dur_sum_days=dur_sum,
        dur_cap_sum=dur_cap,
        rr=_ratio(cap, ac),
        dur_mean_days=_ratio(dur_sum, n_built),
        dur_capacity_weighted_days=_ratio(dur_cap, cap),
        bl=_ratio(n_late, n_built),
        lchg=_ratio(n_rel, n_built),
        bl_capacity=_ratio(late_cap, cap),
        lchg_capacity=_ratio(rel_cap, cap),
        bcr=_ratio(award.total_bid_capacity_kw, spec.tendered_capacity_kw),
        pvc6=pv_index.get(Month.of(spec.date).shift(PV_INDEX_LAG_MONTHS)),
        net_vs_full_gap=_ratio(sum(gaps), len(gaps)),
        n_gap=len(gaps),
        gap_sum=sum(gaps),
    )


def all_auction_metrics(outcomes, awards, pv_index, specs) -> list[AuctionMetrics]:
    outcomes = list(outcomes)
    return [auction_metrics(outcomes, awards[a], pv_index, specs[a]) for a in sorted(awards)]


@dataclass(frozen=True)
class AggregateRow:
    label: str
    first_auction: int
    last_auction: int
    n_auctions: int
    awarded_capacity_kw: float
    built_capacity_kw: float
    n_built: int
    rr: float | None
    dur_mean_days: float | None
    dur_capacity_weighted_days: float | None
    bl: float | None
    lchg: float | None
    bl_capacity: float | None
    lchg_capacity: float | None
    net_vs_full_gap: float | None


AGGREGATE_COLUMNS = tuple(f.name for f in fields(AggregateRow))

DEFAULT_RANGES = (("AU1-AU8", 1, 8), ("AU9-AU12", 9, 12), ("AU1-AU12", 1, 12))


def programme_aggregates(
    metrics: Sequence[AuctionMetrics], ranges: Sequence[tuple[str, int, int]] = DEFAULT_RANGES
) -> list[AggregateRow]:
    """Pool auctions over inclusive index ranges.

    Realisation and penalty shares pool the underlying counts and
    capacities, so each pooled value is weighted by built projects (or
    built capacity) rather than averaging per-auction percentages.
    """
    rows = []
    by_index = {m.auction_index: m for m in metrics}
    for label, lo, hi in ranges:
        ms = [by_index[a] for a in sorted(by_index) if lo <= a <= hi]
        if not ms:
            raise MetricsError(f"range {label} ({lo}..{hi}) selects no auctions")
        ac = sum(m.awarded_capacity_kw for m in ms)
        cap = sum(m.built_capacity_kw for m in ms)
        n_built = sum(m.n_built for m in ms)
        rows.append(AggregateRow(
            label=label,
            first_auction=lo,
            last_auction=hi,
            n_auctions=len(ms),
            awarded_capacity_kw=ac,
            built_capacity_kw=cap,
            n_built=n_built,
            rr=_ratio(cap, ac),
            dur_mean_days=_ratio(sum(m.dur_sum_days for m in ms), n_built),
            dur_capacity_weighted_days=_ratio(sum(m.dur_cap_sum for m in ms), cap),
            bl=_ratio(sum(m.n_late for m in ms), n_built),
            lchg=_ratio(sum(m.n_relocated for m in ms), n_built),
            bl_capacity=_ratio(sum(m.late_capacity_kw for m in ms), cap),
            lchg_capacity=_ratio(sum(m.relocated_capacity_kw for m in ms), cap),
            net_vs_full_gap=_ratio(sum(m.gap_sum for m in ms), sum(m.n_gap for m in ms)),
        ))
    return rows


def participation_shares(outcomes: Iterable[ProjectOutcome]) -> list[dict]:
    """Share of new and of small developers among each auction's winners."""
    devs: dict[int, dict[str, ProjectOutcome]] = defaultdict(dict)
    for o in outcomes:
        devs[o.auction_index].setdefault(o.developer_key, o)
    rows = []
    for a in sorted(devs):
        ds = list(devs[a].values())
        rows.append({
            "auction": a,
            "n_developers": len(ds),
            "new_share": sum(d.new_dev for d in ds) / len(ds),
            "small_share": sum(d.small_dev for d in ds) / len(ds),
        })
    return rows


def uniform_price_auctions(specs: Mapping[int, AuctionSpec]) -> set[int]:
    return {a for a, s in specs.items() if s.pricing_rule is PricingRule.UNIFORM_PRICE}
