"""Auction clearing, securities, penalties and the tender-volume schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .registers import (
    AuctionResults,
    AuctionSpec,
    BidId,
    PricingRule,
    SubmittedBid,
)

FIRST_SECURITY_EUR_KW = 5.0
SECOND_SECURITY_EUR_KW = 45.0
SECOND_SECURITY_DOCS_EUR_KW = 15.0
CANCELLATION_PENALTY_EUR_KW = 50.0
CANCELLATION_PENALTY_DOCS_EUR_KW = 25.0
CANCELLATION_SHARE = 0.05
REDUCTION_CT_KWH = 0.3

MARGINAL_RULES = ("full", "curtail", "reject")


class ClearingError(ValueError):
    pass


@dataclass(frozen=True)
class Award:
    bid_id: BidId
    capacity_kw: float
    price: float  # submitted, ct/kWh
    pay_tariff: float  # ct/kWh


@dataclass
class AwardOutcome:
    auction_index: int
    pricing_rule: PricingRule
    tendered_capacity_kw: float
    awarded: list[Award]
    rejected: list[BidId] = field(default_factory=list)
    total_bid_capacity_kw: float = 0.0

    @property
    def awarded_capacity_kw(self) -> float:
        return sum(a.capacity_kw for a in self.awarded)

    @property
    def max_awarded_bid(self) -> float | None:
        return max((a.price for a in self.awarded), default=None)

    @property
    def min_awarded_bid(self) -> float | None:
        return min((a.price for a in self.awarded), default=None)

    @property
    def weighted_avg_bid(self) -> float | None:
        """Capacity-weighted average of the tariffs actually awarded."""
        cap = self.awarded_capacity_kw
        if cap <= 0:
            return None
        return sum(a.pay_tariff * a.capacity_kw for a in self.awarded) / cap

    def payments(self, generation_kwh: Mapping[BidId, float]) -> float:
        """Total support paid (ct) for a per-bid generation profile."""
        return sum(a.pay_tariff * generation_kwh.get(a.bid_id, 0.0) for a in self.awarded)


def _merit_key(bid: SubmittedBid):
    # price, then smaller capacity, then arrival order
    return (bid.price, bid.capacity_kw, bid.bid_id.sequence, bid.bid_id)


def _set_tariffs(rule: PricingRule, picks: list[tuple[SubmittedBid, float]]) -> list[Award]:
    if not picks:
        return []
    mbid = max(b.price for b, _ in picks)
    out = []
    for b, cap in picks:
        tariff = mbid if rule is PricingRule.UNIFORM_PRICE else b.price
        out.append(Award(b.bid_id, cap, b.price, tariff))
    return out


def clear_auction(
    spec: AuctionSpec, bids: Sequence[SubmittedBid], *, marginal: str = "full"
) -> AwardOutcome:
    """Award bids in merit order until the tendered capacity is exhausted.

    ``marginal`` decides the fate of the bid that straddles the remaining
    volume: ``full`` awards it completely (default), ``curtail`` awards
    only the remaining volume, ``reject`` stops before it.
    """
    if marginal not in MARGINAL_RULES:
        raise ClearingError(f"unknown marginal rule {marginal!r}")
    seen: set[BidId] = set()
    for b in bids:
        if b.bid_id in seen:
            raise ClearingError(f"duplicate bid id {b.bid_id}")
        seen.add(b.bid_id)

    eligible = [b for b in bids if b.price <= spec.ceiling_price]
    rejected = sorted(b.bid_id for b in bids if b.price > spec.ceiling_price)

    remaining = spec.tendered_capacity_kw
    picks: list[tuple[SubmittedBid, float]] = []
    for b in sorted(eligible, key=_merit_key):
        if remaining <= 0:
            break
        if b.capacity_kw <= remaining:
            picks.append((b, b.capacity_kw))
            remaining -= b.capacity_kw
            continue
        if marginal == "full":
            picks.append((b, b.capacity_kw))
        elif marginal == "curtail":
            picks.append((b, remaining))
        remaining = 0
        break

    return AwardOutcome(
        auction_index=spec.auction_index,
        pricing_rule=spec.pricing_rule,
        tendered_capacity_kw=spec.tendered_capacity_kw,
        awarded=_set_tariffs(spec.pricing_rule, picks),
        rejected=rejected,
        total_bid_capacity_kw=sum(b.capacity_kw for b in bids),
    )


def observed_outcome(results: AuctionResults, auction_index: int) -> AwardOutcome:
    """Rebuild an AwardOutcome from published results (award flags as given)."""
    spec = results.specs[auction_index]
    rows = list(results.bids(auction_index))
    picks = [(r.bid, r.bid.capacity_kw) for r in rows if r.awarded]
    picks.sort(key=lambda p: _merit_key(p[0]))
    return AwardOutcome(
        auction_index=auction_index,
        pricing_rule=spec.pricing_rule,
        tendered_capacity_kw=spec.tendered_capacity_kw,
        awarded=_set_tariffs(spec.pricing_rule, picks),
        rejected=sorted(r.bid.bid_id for r in rows if r.bid.price > spec.ceiling_price),
        total_bid_capacity_kw=sum(r.bid.capacity_kw for r in rows),
    )


def observed_outcomes(results: AuctionResults) -> dict[int, AwardOutcome]:
    return {a: observed_outcome(results, a) for a in sorted(results.specs)}


# --------------------------------------------------------------------------
# securities and penalties
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SecuritySchedule:
    first_security: float  # EUR/kW
    second_security: float
    capacity_kw: float

    @property
    def total(self) -> float:
        return self.first_security + self.second_security

    @property
    def absolute_eur(self) -> float:
        return self.total * self.capacity_kw


def security_schedule(bid: SubmittedBid) -> SecuritySchedule:
    second = SECOND_SECURITY_DOCS_EUR_KW if bid.land_use_docs else SECOND_SECURITY_EUR_KW
    return SecuritySchedule(FIRST_SECURITY_EUR_KW, second, bid.capacity_kw)


@dataclass(frozen=True)
class PenaltyAssessment:
    forfeited_first_security: float  # EUR
    cancellation_penalty: float  # EUR
    tariff_reduction: float  # ct/kWh


def tariff_reduction(late: bool, relocated: bool) -> float:
    """Additive 0.3 ct/kWh cuts for missing the first deadline and for relocation."""
    return REDUCTION_CT_KWH * int(late) + REDUCTION_CT_KWH * int(relocated)


def assess_penalty(
    bid: SubmittedBid,
    realised_capacity_kw: float,
    second_security_paid: bool,
    late: bool,
    relocated: bool,
) -> PenaltyAssessment:
    if realised_capacity_kw < 0 or realised_capacity_kw > bid.capacity_kw:
        raise ClearingError(
            f"realised capacity {realised_capacity_kw} kW outside [0, {bid.capacity_kw}] for {bid.bid_id}"
        )
    if not second_security_paid:
        return PenaltyAssessment(FIRST_SECURITY_EUR_KW * bid.capacity_kw, 0.0, 0.0)
    cancelled = bid.capacity_kw - realised_capacity_kw
    penalty = 0.0
    if cancelled >= CANCELLATION_SHARE * bid.capacity_kw:
        rate = CANCELLATION_PENALTY_DOCS_EUR_KW if bid.land_use_docs else CANCELLATION_PENALTY_EUR_KW
        penalty = rate * cancelled
    reduction = tariff_reduction(late, relocated) if realised_capacity_kw > 0 else 0.0
    return PenaltyAssessment(0.0, penalty, reduction)


# --------------------------------------------------------------------------
# tender schedule
# --------------------------------------------------------------------------

# MW per tender date; "*" dates are special tenders
BASE_TENDER_PLANS: dict[str, dict[str, float]] = {
    "2015": {"Apr": 800, "Aug": 150, "Dec": 200},
    "2016": {"Apr": 125, "Aug": 125, "Dec": 160},
    "2017": {"Feb": 200, "Jun": 200, "Oct": 200},
    "2018": {"Feb": 200, "Jun": 200, "Oct": 200},
    "2019": {"Feb": 175, "Mar*": 500, "Jun": 150, "Oct": 150, "Dec*": 500},
    "2020": {"Feb": 100, "Mar*": 300, "Jun": 150, "Jul*": 300, "Sep*": 400, "Oct": 150, "Dec*": 400},
    "2021": {"Feb": 150, "Mar*": 400, "Jun": 100, "Jul*": 400, "Sep*": 400, "Oct": 100, "Dec*": 400},
    "2022": {"Feb": 200, "Jun": 200, "Oct": 200},
}


@dataclass(frozen=True)
class VolumeReductions:
    eu_cross_border_kw: float = 0.0
    non_auction_large_pv_kw: float = 0.0
    neutral_auction_solar_kw: float = 0.0  # counted at half weight

    @property
    def total(self) -> float:
        return self.eu_cross_border_kw + self.non_auction_large_pv_kw + 0.5 * self.neutral_auction_solar_kw


def tender_schedule(
    base_plan: Mapping[str, float],
    prior_year_unawarded_kw: float = 0.0,
    reductions: VolumeReductions | None = None,
) -> dict[str, float]:
    """Adjust a year's tender plan for last year's shortfall and the reduction factors.

    Both the carried-over shortfall and the reduction are spread equally
    over the year's tender dates; volumes are floored at zero.
    """
    reductions = reductions or VolumeReductions()
    values = [prior_year_unawarded_kw, reductions.eu_cross_border_kw,
              reductions.non_auction_large_pv_kw, reductions.neutral_auction_solar_kw,
              *base_plan.values()]
    if any(v < 0 for v in values):
        raise ClearingError("tender schedule inputs must be non-negative")
    if not base_plan:
        raise ClearingError("empty tender plan")
    k = len(base_plan)
    delta = (prior_year_unawarded_kw - reductions.total) / k
    return {d: max(0.0, v + delta) for d, v in base_plan.items()}
