"""Unit identification and bid-value reconstruction.

Stages, in pipeline order:

1. ``identify_projects``: awarded bids -> commissioned units via the bid id
   carried in the unit register (fan-out to one project per unit).
2. ``attach_payments``: units -> TSO payment rows.
3. ``select_market_premium`` / ``effective_premium`` / ``net_bid_value`` /
   ``full_bid_value``: monthly net and full bid values.
4. ``consolidate_bid_values``: per-project constants, propagation within a
   bid, exclusion of uniform-price auctions from the bid sample.
"""

from __future__ import annotations

import logging
import re
import string
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .clearing import REDUCTION_CT_KWH
from .metrics import pen_dline, pen_loc
from .registers import (
    PRICE_DIGITS,
    AuctionResults,
    BidId,
    Month,
    PaymentRecord,
    PricingRule,
    ProjectId,
    TariffCategory,
    TariffEntry,
    UnitRecord,
)

logger = logging.getLogger(__name__)

# time-invariance tolerance for monthly values, ct/kWh
DEFAULT_TAU = 0.005


class LinkageError(ValueError):
    pass


class Status(str, Enum):
    BUILT = "Built"
    NOT_FOUND = "NotFound"


class Reliability(str, Enum):
    OBSERVED = "Observed"
    PROPAGATED = "PropagatedFromBid"
    UNRELIABLE = "Unreliable"
    ZERO_PREMIUM = "ZeroPremium"
    NO_PAYMENTS = "NoPayments"
    EXCLUDED = "Excluded"


@dataclass(frozen=True)
class ProjectRecord:
    project_id: ProjectId
    auction_index: int
    status: Status
    capacity_kw: float
    loc_in: str
    developer_key: str
    unit_id: str | None = None
    commissioning_date: date | None = None
    loc_out: str | None = None
    state: str | None = None

    @property
    def bid_id(self) -> BidId:
        return self.project_id.bid

    @property
    def built(self) -> bool:
        return self.status is Status.BUILT


# --------------------------------------------------------------------------
# developers
# --------------------------------------------------------------------------

_PUNCT = str.maketrans({c: " " for c in string.punctuation})


def normalize_address(text: str) -> str:
    """Case-fold, drop punctuation, collapse whitespace. Exact matching only."""
    return re.sub(r"\s+", " ", text.casefold().translate(_PUNCT)).strip()


def developer_key(name: str, address: str) -> str:
    addr = normalize_address(address)
    if addr:
        return addr
    return "name:" + normalize_address(name)


@dataclass
class DeveloperProfile:
    developer_key: str
    canonical_address: str
    member_names: set[str] = field(default_factory=set)
    projects: set[ProjectId] = field(default_factory=set)  # won and built
    size_kw: float = 0.0
    first_win_auction: int | None = None


def aggregate_developers(
    results: AuctionResults, projects: Sequence[ProjectRecord]
) -> tuple[dict[str, DeveloperProfile], list[str]]:
    """Group winning bidders registered under the same address.

    Returns profiles keyed by developer key plus a warning list (bidders
    with an empty address are keyed by their name).
    """
    profiles: dict[str, DeveloperProfile] = {}
    warnings: list[str] = []
    for row in sorted(results.bids(awarded_only=True), key=lambda r: r.bid.bid_id):
        b = row.bid
        key = developer_key(b.developer_name, b.developer_address)
        if key.startswith("name:"):
            warnings.append(f"bid {b.bid_id}: empty developer address, keyed by name {b.developer_name!r}")
        prof = profiles.get(key)
        if prof is None:
            prof = profiles[key] = DeveloperProfile(key, normalize_address(b.developer_address))
        prof.member_names.add(b.developer_name)
        if prof.first_win_auction is None or row.auction_index < prof.first_win_auction:
            prof.first_win_auction = row.auction_index
    for p in projects:
        if p.built:
            prof = profiles[p.developer_key]
            prof.projects.add(p.project_id)
            prof.size_kw += p.capacity_kw
    for w in warnings:
        logger.warning(w)
    return profiles, warnings


# --------------------------------------------------------------------------
# step 1: identification
# --------------------------------------------------------------------------


def identify_projects(
    results: AuctionResults, units: Iterable[UnitRecord]
) -> tuple[list[ProjectRecord], list[str]]:
    """Fan every awarded bid out to its commissioned units.

    Units sharing a bid id are indexed 1..k by commissioning date, then
    unit id. An awarded bid without units yields one NotFound project with
    the bid's capacity. Units pointing at unknown bids produce warnings.
    """
    awarded = results.awarded_by_id()
    by_bid: dict[BidId, list[UnitRecord]] = defaultdict(list)
    warnings = []
    for u in units:
        if u.bid_id is None:
            continue
        if u.bid_id not in awarded:
            warnings.append(f"unit {u.unit_id} references bid {u.bid_id} absent from awarded results")
            continue
        by_bid[u.bid_id].append(u)

    projects = []
    for bid_id in sorted(awarded):
        row = awarded[bid_id]
        b = row.bid
        dev = developer_key(b.developer_name, b.developer_address)
        matched = sorted(by_bid.get(bid_id, ()), key=lambda u: (u.commissioning_date, u.unit_id))
        if not matched:
            projects.append(
                ProjectRecord(ProjectId(bid_id, 1), row.auction_index, Status.NOT_FOUND,
                              b.capacity_kw, b.postal_code, dev)
            )
            continue
        for k, u in enumerate(matched, start=1):
            projects.append(
                ProjectRecord(
                    ProjectId(bid_id, k), row.auction_index, Status.BUILT, u.capacity_kw,
                    b.postal_code, dev, unit_id=u.unit_id, commissioning_date=u.commissioning_date,
                    loc_out=u.postal_code, state=u.state,
                )
            )
    for w in warnings:
        logger.warning(w)
    return projects, warnings


# --------------------------------------------------------------------------
# step 2: payments
# --------------------------------------------------------------------------


def attach_payments(
    projects: Sequence[ProjectRecord], payments: Iterable[PaymentRecord]
) -> dict[ProjectId, list[PaymentRecord]]:
    """Payment rows per Built project; an empty list means NoPayments."""
    by_unit: dict[str, list[PaymentRecord]] = defaultdict(list)
    for p in payments:
        by_unit[p.unit_id].append(p)
    out = {}
    for proj in projects:
        if proj.built:
            out[proj.project_id] = sorted(by_unit.get(proj.unit_id, ()), key=lambda r: (r.month, r.tariff_id))
    return out


# --------------------------------------------------------------------------
# step 3: monthly bid values
# --------------------------------------------------------------------------


def select_market_premium(
    stream: Iterable[PaymentRecord], tariffs: Mapping[str, TariffEntry]
) -> list[PaymentRecord]:
    out = []
    for row in stream:
        entry = tariffs.get(row.tariff_id)
        if entry is None:
            raise LinkageError(f"unknown tariff id {row.tariff_id!r} (unit {row.unit_id}, {row.month})")
        if entry.category is TariffCategory.MARKET_PREMIUM:
            out.append(row)
    return out


def effective_premium(row: PaymentRecord) -> float | None:
    """Market premium in ct/kWh, or None when the row has no generation."""
    if row.generation_kwh <= 0:
        return None
    return row.payment_ct / row.generation_kwh


def net_bid_value(mp: float, mv: float) -> float:
    return mp + mv


def full_bid_value(bv_net: float, pen_loc: int, pen_dline: int) -> float:
    return bv_net + REDUCTION_CT_KWH * pen_loc + REDUCTION_CT_KWH * pen_dline


@dataclass
class BidValueEstimate:
    project_id: ProjectId
    monthly_net: dict[Month, float] = field(default_factory=dict)
    monthly_full: dict[Month, float] = field(default_factory=dict)
    consolidated_net: float | None = None
    consolidated_full: float | None = None
    reliability: Reliability = Reliability.NO_PAYMENTS
    origin: Reliability = Reliability.NO_PAYMENTS  # reliability before exclusion
    payments_found: bool = False
    zero_months: int = 0
    skipped_generation: int = 0
    skipped_market_value: int = 0

    @property
    def in_bid_sample(self) -> bool:
        return self.reliability in (Reliability.OBSERVED, Reliability.PROPAGATED)


def monthly_bid_values(
    project: ProjectRecord,
    stream: Sequence[PaymentRecord],
    tariffs: Mapping[str, TariffEntry],
    market_values: Mapping[Month, float],
    deadline: date,
) -> BidValueEstimate:
    """Steps 3.1-3.3 for one Built project."""
    est = BidValueEstimate(project.project_id, payments_found=bool(stream))
    ploc = pen_loc(project.loc_in, project.loc_out)
    pdl = pen_dline(project.commissioning_date, deadline)
    per_month: dict[Month, list[float]] = defaultdict(lambda: [0.0, 0.0])
    for row in select_market_premium(stream, tariffs):
        if row.generation_kwh <= 0:
            est.skipped_generation += 1
            continue
        acc = per_month[row.month]
        acc[0] += row.payment_ct
        acc[1] += row.generation_kwh
    for month in sorted(per_month):
        pay, gen = per_month[month]
        mp = pay / gen
        if mp <= 0:
            est.zero_months += 1
            continue
        mv = market_values.get(month)
        if mv is None:
            est.skipped_market_value += 1
            continue
        net = net_bid_value(mp, mv)
        est.monthly_net[month] = net
        est.monthly_full[month] = full_bid_value(net, ploc, pdl)
    return est


def _quantize(x: float) -> float:
    return round(x, PRICE_DIGITS)


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs)


def consolidate_project(est: BidValueEstimate, tau: float = DEFAULT_TAU) -> BidValueEstimate:
    """Collapse a monthly series into per-project constants (rule a)."""
    if est.monthly_full:
        fulls = est.monthly_full.values()
        if max(fulls) - min(fulls) <= tau:
            est.consolidated_full = _quantize(_mean(fulls))
            est.consolidated_net = _quantize(_mean(est.monthly_net.values()))
            est.reliability = Reliability.OBSERVED
        else:
            est.reliability = Reliability.UNRELIABLE
    elif est.zero_months:
        est.reliability = Reliability.ZERO_PREMIUM
    else:
        est.reliability = Reliability.NO_PAYMENTS
    est.origin = est.reliability
    return est


def consolidate_bid_values(
    estimates: Mapping[ProjectId, BidValueEstimate],
    pricing_rules: Mapping[int, PricingRule],
    auction_of: Mapping[ProjectId, int],
    tau: float = DEFAULT_TAU,
) -> tuple[dict[ProjectId, BidValueEstimate], list[str]]:
    """Apply per-project, per-bid and per-auction consolidation rules.

    Estimates must already hold their monthly series. Projects of a bid
    that have no observed value of their own (no payments or only zero
    premia) inherit the bid's value. Projects whose own series is
    inconsistent stay Unreliable. Projects of uniform-price auctions keep
    their value but are marked Excluded from the bid sample.
    """
    diagnostics = []
    for est in estimates.values():
        consolidate_project(est, tau)

    by_bid: dict[BidId, list[BidValueEstimate]] = defaultdict(list)
    for pid in sorted(estimates):
        by_bid[pid.bid].append(estimates[pid])

    for bid_id, group in by_bid.items():
        observed = [e for e in group if e.reliability is Reliability.OBSERVED]
        if not observed:
            continue
        values = [e.consolidated_full for e in observed]
        if max(values) - min(values) > tau:
            diagnostics.append(
                f"bid {bid_id}: observed full bid values disagree "
                f"({min(values):.4f}..{max(values):.4f}); whole bid marked Unreliable"
            )
            for e in group:
                if e.reliability is Reliability.OBSERVED:
                    e.consolidated_full = e.consolidated_net = None
                    e.reliability = e.origin = Reliability.UNRELIABLE
            continue
        bid_value = _quantize(_mean(values))
        for e in observed:
            e.consolidated_full = bid_value
        for e in group:
            if e.reliability in (Reliability.NO_PAYMENTS, Reliability.ZERO_PREMIUM):
                e.consolidated_full = bid_value
                e.reliability = e.origin = Reliability.PROPAGATED

    for pid, est in estimates.items():
        if pricing_rules[auction_of[pid]] is PricingRule.UNIFORM_PRICE and est.in_bid_sample:
            est.reliability = Reliability.EXCLUDED
    for d in diagnostics:
        logger.warning(d)
    return dict(estimates), diagnostics


# --------------------------------------------------------------------------
# whole pipeline
# --------------------------------------------------------------------------


@dataclass
class LinkageResult:
    projects: list[ProjectRecord]
    estimates: dict[ProjectId, BidValueEstimate]
    developers: dict[str, DeveloperProfile]
    streams: dict[ProjectId, list[PaymentRecord]]
    warnings: list[str] = field(default_factory=list)

    def estimate(self, pid: ProjectId) -> BidValueEstimate | None:
        return self.estimates.get(pid)


def run_linkage(registers, tau: float = DEFAULT_TAU) -> LinkageResult:
    """identify -> attach -> clean -> reconstruct -> consolidate."""
    results = registers.results
    projects, warnings = identify_projects(results, registers.units)
    developers, dev_warnings = aggregate_developers(results, projects)
    streams = attach_payments(projects, registers.payments)
    estimates = {}
    for p in projects:
        if not p.built:
            continue
        spec = results.specs[p.auction_index]
        estimates[p.project_id] = monthly_bid_values(
            p, streams[p.project_id], registers.tariffs, registers.market_values,
            spec.deadline_no_reduction,
        )
    rules = {a: s.pricing_rule for a, s in results.specs.items()}
    auction_of = {p.project_id: p.auction_index for p in projects}
    estimates, diags = consolidate_bid_values(estimates, rules, auction_of, tau)
    return LinkageResult(projects, estimates, developers, streams, warnings + dev_warnings + diags)


PIPELINE_COUNT_COLUMNS = (
    "auction", "awarded_capacity_kw", "awarded_bids", "awarded_projects", "built_projects",
    "unit_ids", "payments_found", "reliable", "bid_values", "propagated",
)


def pipeline_counts(results: AuctionResults, link: LinkageResult) -> list[dict]:
    """Per-auction stage counts in the column structure of the data-availability table."""
    rows = []
    for a in sorted(results.specs):
        awarded = list(results.bids(a, awarded_only=True))
        projs = [p for p in link.projects if p.auction_index == a]
        ests = [link.estimates[p.project_id] for p in projs if p.built]
        origins = [e.origin for e in ests]
        rows.append({
            "auction": f"AU{a}",
            "awarded_capacity_kw": sum(r.bid.capacity_kw for r in awarded),
            "awarded_bids": len(awarded),
            "awarded_projects": len(projs),
            "built_projects": sum(p.built for p in projs),
            "unit_ids": sum(p.unit_id is not None for p in projs),
            "payments_found": sum(e.payments_found for e in ests),
            "reliable": origins.count(Reliability.OBSERVED),
            "bid_values": origins.count(Reliability.OBSERVED) + origins.count(Reliability.PROPAGATED),
            "propagated": origins.count(Reliability.PROPAGATED),
        })
    return rows
