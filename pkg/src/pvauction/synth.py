"""Seeded synthetic auction worlds with known ground truth.

A world holds developers, bids, clearing results, realisation behaviour and
monthly payment streams. Payments are produced by running the bid
reconstruction backwards: premium = max(0, bid - reductions - market value),
times a seasonal generation profile, rounded to whole cents. The emitted
register files therefore carry a planted answer for every project.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .clearing import AwardOutcome, clear_auction, tariff_reduction
from .registers import (
    AuctionResultRow,
    AuctionResults,
    AuctionSpec,
    BidId,
    MarketValue,
    Month,
    PaymentRecord,
    PricingRule,
    Programme,
    ProjectId,
    PvCostIndex,
    SubmittedBid,
    TariffCategory,
    TariffEntry,
    UnitRecord,
    fmt_num,
    fmt_price,
    write_auction_results,
    write_csv,
    write_market_values,
    write_payments,
    write_pv_index,
    write_tariffs,
    write_units,
)

logger = logging.getLogger(__name__)


class WorldError(ValueError):
    pass


STATE_POSTAL_PREFIXES: dict[str, tuple[str, ...]] = {
    "Bavaria": ("80", "81", "82", "83", "84", "85", "86", "87", "90", "91", "92", "93", "94", "95", "96", "97"),
    "Baden-Wuerttemberg": ("68", "69", "70", "71", "72", "73", "74", "75", "76", "77", "78", "79", "88", "89"),
    "Hesse": ("34", "35", "36", "60", "61", "63", "64", "65"),
    "Rhineland-Palatinate": ("54", "55", "56", "67"),
    "Saarland": ("66",),
    "Thuringia": ("07", "98", "99"),
    "Saxony": ("01", "02", "04", "08", "09"),
    "Brandenburg": ("03", "14", "15", "16"),
    "Mecklenburg-Western Pomerania": ("17", "18", "19"),
    "Saxony-Anhalt": ("06", "38", "39"),
    "Schleswig-Holstein": ("23", "24", "25"),
    "Lower Saxony": ("26", "27", "29", "30", "31", "37", "49"),
    "North-Rhine Westphalia": ("32", "33", "40", "41", "42", "44", "45", "46", "47", "48", "50", "51", "52", "53"),
}

STATE_WEIGHTS: dict[str, float] = {
    "Bavaria": 0.35, "Brandenburg": 0.15, "Mecklenburg-Western Pomerania": 0.08,
    "Saxony-Anhalt": 0.08, "Baden-Wuerttemberg": 0.04, "Saxony": 0.06, "Thuringia": 0.04,
    "Hesse": 0.03, "Rhineland-Palatinate": 0.04, "Saarland": 0.02, "Schleswig-Holstein": 0.04,
    "North-Rhine Westphalia": 0.03, "Lower Saxony": 0.04,
}

TARIFFS = (
    TariffEntry("MP-FFAV", "market premium, ground-mounted tender regulation", TariffCategory.MARKET_PREMIUM),
    TariffEntry("MP-EEG17", "market premium, tendered solar RES Act 2017", TariffCategory.MARKET_PREMIUM),
    TariffEntry("ANC", "avoided network charges", TariffCategory.SIDE_PAYMENT),
    TariffEntry("BON", "bonus payment", TariffCategory.SIDE_PAYMENT),
)

STREETS = ("Hauptstr.", "Bahnhofstr.", "Gartenweg", "Industriestr.", "Am Markt", "Lindenallee", "Sonnenweg")
CITIES = (("10115", "Berlin"), ("80331", "Muenchen"), ("20095", "Hamburg"), ("04109", "Leipzig"),
          ("90402", "Nuernberg"), ("14467", "Potsdam"), ("93047", "Regensburg"), ("39104", "Magdeburg"))


@dataclass
class AuctionPlan:
    index: int
    date: date
    tendered_kw: float
    pricing_rule: PricingRule = PricingRule.PAY_AS_BID
    ceiling: float = 11.29


@dataclass
class WorldConfig:
    seed: int = 42
    # auctions
    n_auctions: int = 12
    start_date: date = date(2015, 4, 15)
    spacing_months: int = 4
    tendered_kw: float = 150_000.0
    ceiling_ct: float = 11.29
    uniform_price_auctions: tuple[int, ...] = (2, 3)
    auctions: list[AuctionPlan] | None = None
    announcement_lag_days: int = 15
    bids_per_auction: tuple[int, int] = (40, 90)
    max_projects_per_bid: int = 3
    min_unit_kw: float = 500.0
    # developers
    n_developers: int = 40
    address_sharing_rate: float = 0.3
    developer_size_exponent: float = 1.0
    # prices and cost trajectories
    price_start: float = 9.2
    price_end: float = 4.4
    price_sd: float = 0.5
    pv_index_start: float = 0.55
    pv_index_end: float = 0.25
    mv_start: float = 3.0
    mv_end: float = 4.0
    mv_seasonal_amp: float = 0.6
    mv_noise_sd: float = 0.2
    # behaviour
    p_cancel: float = 0.05
    cancel_by_auction: dict[int, float] | None = None  # overrides p_cancel per auction index
    p_relocate: float = 0.46
    p_late: float = 0.28
    p_relocate_other_state: float = 0.6
    duration_model: str = "windows"  # or "normal"
    duration_mean_days: float = 495.0
    duration_sd_days: float = 60.0
    relocation_gap_days: float = 0.0
    min_duration_days: int = 60
    # data availability
    p_missing_unit_id: float = 0.0
    p_missing_payments: float = 0.0
    p_side_payment: float = 0.2
    # payment synthesis
    payment_months: int = 24
    horizon_end: Month | None = None
    yield_mean_kwh_per_kw: float = 100.0
    yield_amplitude: float = 60.0

    def validate(self) -> None:
        for f in fields(self):
            if f.name.startswith("p_") or f.name == "address_sharing_rate":
                v = getattr(self, f.name)
                if not 0.0 <= v <= 1.0:
                    raise WorldError(f"{f.name} must be a probability, got {v}")
        for a, v in (self.cancel_by_auction or {}).items():
            if not 0.0 <= v <= 1.0:
                raise WorldError(f"cancel_by_auction[{a}] must be a probability, got {v}")
        if self.duration_model not in ("windows", "normal"):
            raise WorldError(f"unknown duration_model {self.duration_model!r}")
        if self.min_unit_kw <= 0 or self.max_projects_per_bid < 1:
            raise WorldError("project split settings must be positive")
        if self.yield_amplitude >= self.yield_mean_kwh_per_kw:
            raise WorldError("yield amplitude must stay below the mean yield")
        if self.n_developers < 1:
            raise WorldError("need at least one developer")

    def auction_plans(self) -> list[AuctionPlan]:
        if self.auctions is not None:
            return list(self.auctions)
        from .registers import add_months

        plans = []
        for k in range(self.n_auctions):
            idx = k + 1
            rule = PricingRule.UNIFORM_PRICE if idx in self.uniform_price_auctions else PricingRule.PAY_AS_BID
            plans.append(AuctionPlan(idx, add_months(self.start_date, k * self.spacing_months),
                                     self.tendered_kw, rule, self.ceiling_ct))
        return plans


@dataclass
class TruthProject:
    project_id: ProjectId | None  # id the pipeline should assign; None if invisible
    bid_id: BidId
    auction_index: int
    developer: str
    capacity_kw: float
    built: bool
    registered: bool
    has_payments: bool
    unit_id: str | None
    commissioning_date: date | None
    duration_days: int | None
    late: bool
    relocated: bool
    state: str | None
    bid: float  # planted full bid value (awarded tariff)
    reduction: float
    n_positive_months: int = 0
    loc_end: str | None = None


@dataclass
class TruthAuction:
    auction_index: int
    awarded_capacity_kw: float
    built_capacity_kw: float
    n_built: int
    rr: float | None
    lchg: float | None
    bl: float | None
    weighted_avg_bid: float | None


@dataclass
class GroundTruth:
    projects: list[TruthProject]
    auctions: list[TruthAuction]

    def by_unit(self) -> dict[str, TruthProject]:
        return {p.unit_id: p for p in self.projects if p.unit_id is not None}


@dataclass
class World:
    config: WorldConfig
    results: AuctionResults
    outcomes: dict[int, AwardOutcome]
    units: list[UnitRecord]
    payments: list[PaymentRecord]
    market_values: list[MarketValue]
    tariffs: list[TariffEntry]
    pv_index: list[PvCostIndex]
    truth: GroundTruth

    def registers(self):
        from .registers import RegisterSet

        return RegisterSet(
            results=self.results,
            units=list(self.units),
            payments=list(self.payments),
            market_values={m.month: m.value for m in self.market_values},
            tariffs={t.tariff_id: t for t in self.tariffs},
            pv_index={p.month: p.index_value for p in self.pv_index},
        )


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------


def _postal(rng, state: str, avoid: str | None = None) -> str:
    prefixes = STATE_POSTAL_PREFIXES[state]
    while True:
        code = prefixes[rng.integers(len(prefixes))] + f"{rng.integers(1000):03d}"
        if code != avoid:
            return code


def _pick_state(rng, states, probs) -> str:
    return states[rng.choice(len(states), p=probs)]


def _split_capacity(rng, cap: float, k: int, min_unit: float) -> list[float]:
    if k == 1:
        return [cap]
    extra = cap - k * min_unit
    w = rng.dirichlet(np.ones(k))
    parts = [float(math.floor(min_unit + extra * x)) for x in w]
    parts[-1] = cap - sum(parts[:-1])
    return parts


def _address_variant(rng, street: str, number: int, plz: str, city: str) -> str:
    base = f"{street} {number}, {plz} {city}"
    style = rng.integers(3)
    if style == 1:
        return base.lower().replace(".", "")
    if style == 2:
        return base.upper().replace(",", "")
    return base


def generation_kwh(capacity_kw: float, month: Month, cfg: WorldConfig) -> int:
    season = math.cos(2 * math.pi * (month.month - 7) / 12)
    return int(round(capacity_kw * (cfg.yield_mean_kwh_per_kw + cfg.yield_amplitude * season)))


def generate_world(config: WorldConfig) -> World:
    """Build a world deterministically from ``config.seed``."""
    cfg = config
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    plans = cfg.auction_plans()
    if not plans:
        raise WorldError("world needs at least one auction")

    # developers: unique addresses, several company names each
    developers = []
    for d in range(cfg.n_developers):
        street = STREETS[d % len(STREETS)]
        plz, city = CITIES[rng.integers(len(CITIES))]
        developers.append({
            "key": f"D{d + 1:03d}",
            "street": street, "number": d + 1, "plz": plz, "city": city,
            "names": [f"Developer {d + 1} Solar GmbH"],
        })
    dev_w = 1.0 / np.arange(1, cfg.n_developers + 1) ** cfg.developer_size_exponent
    dev_w = dev_w / dev_w.sum()
    states = list(STATE_WEIGHTS)
    state_p = np.array([STATE_WEIGHTS[s] for s in states])
    state_p = state_p / state_p.sum()

    specs: dict[int, AuctionSpec] = {}
    rows: list[AuctionResultRow] = []
    outcomes: dict[int, AwardOutcome] = {}
    bid_meta: dict[BidId, dict] = {}
    rounds_in_year: dict[int, int] = {}
    n = len(plans)
    for k, plan in enumerate(plans):
        year = plan.date.year
        rounds_in_year[year] = rounds_in_year.get(year, 0) + 1
        programme = Programme.FFA if year <= 2016 else Programme.SOL
        spec = AuctionSpec(plan.index, plan.date, plan.tendered_kw, plan.pricing_rule, plan.ceiling,
                           plan.date + timedelta(days=cfg.announcement_lag_days))
        specs[plan.index] = spec
        n_bids = int(rng.integers(cfg.bids_per_auction[0], cfg.bids_per_auction[1] + 1))
        arrival = rng.permutation(n_bids) + 1
        mean_price = cfg.price_start + (cfg.price_end - cfg.price_start) * (k / max(n - 1, 1))
        bids = []
        for j in range(n_bids):
            dev = developers[rng.choice(cfg.n_developers, p=dev_w)]
            if rng.random() < cfg.address_sharing_rate:
                dev["names"].append(f"Solarpark {dev['key'][1:]}-{len(dev['names'])} GmbH & Co. KG")
                name = dev["names"][-1]
            else:
                name = dev["names"][rng.integers(len(dev["names"]))]
            cap = float(rng.integers(750, 10001))
            price = round(float(max(1.0, rng.normal(mean_price, cfg.price_sd))), 2)
            state = _pick_state(rng, states, state_p)
            bid_id = BidId(programme, year % 100, rounds_in_year[year], int(arrival[j]))
            bid = SubmittedBid(
                bid_id, name,
                _address_variant(rng, dev["street"], dev["number"], dev["plz"], dev["city"]),
                cap, price, _postal(rng, state), bool(rng.random() < 0.3),
            )
            bids.append(bid)
            bid_meta[bid_id] = {"developer": dev["key"], "state_in": state}
        outcome = clear_auction(spec, bids)
        outcomes[plan.index] = outcome
        won = {a.bid_id for a in outcome.awarded}
        for b in sorted(bids, key=lambda b: b.bid_id):
            rows.append(AuctionResultRow(plan.index, b, b.bid_id in won))
    results = AuctionResults(specs, rows)

    # realisation behaviour
    truth_projects: list[TruthProject] = []
    unit_counter = 0
    for a in sorted(outcomes):
        spec = specs[a]
        d_in = spec.first_announcement
        dl_days = (spec.deadline_no_reduction - d_in).days
        ex_days = (spec.deadline_expiry - d_in).days
        by_id = {r.bid.bid_id: r.bid for r in results.bids(a, awarded_only=True)}
        p_cancel = (cfg.cancel_by_auction or {}).get(a, cfg.p_cancel)
        for award in outcome_sorted(outcomes[a]):
            bid = by_id[award.bid_id]
            meta = bid_meta[award.bid_id]
            kmax = max(1, min(cfg.max_projects_per_bid, int(bid.capacity_kw // cfg.min_unit_kw)))
            k = int(rng.integers(1, kmax + 1))
            for part in _split_capacity(rng, bid.capacity_kw, k, cfg.min_unit_kw):
                built = bool(rng.random() >= p_cancel)
                relocated = bool(rng.random() < cfg.p_relocate)
                late_draw = bool(rng.random() < cfg.p_late)
                u_pos = float(rng.random())
                z = float(rng.normal())
                other_state = bool(rng.random() < cfg.p_relocate_other_state)
                registered = bool(rng.random() >= cfg.p_missing_unit_id)
                paid = bool(rng.random() >= cfg.p_missing_payments)
                if not built:
                    truth_projects.append(TruthProject(
                        None, award.bid_id, a, meta["developer"], part, False, False, False, None,
                        None, None, False, False, None, award.pay_tariff, 0.0))
                    continue
                if cfg.duration_model == "windows":
                    if late_draw:
                        dur = dl_days + 1 + int(u_pos * (ex_days - dl_days - 1))
                    else:
                        dur = cfg.min_duration_days + int(u_pos * (dl_days - cfg.min_duration_days + 1))
                        dur = min(dur, dl_days)
                else:
                    mu = cfg.duration_mean_days + cfg.relocation_gap_days * relocated
                    dur = int(round(mu + cfg.duration_sd_days * z))
                    dur = min(max(dur, cfg.min_duration_days), ex_days)
                commissioned = d_in + timedelta(days=dur)
                late = commissioned > spec.deadline_no_reduction
                if relocated:
                    st = meta["state_in"]
                    if other_state:
                        st = _pick_state(rng, [s for s in states if s != st],
                                         _renorm(state_p, states, st))
                    loc_end = _postal(rng, st, avoid=bid.postal_code)
                else:
                    st, loc_end = meta["state_in"], bid.postal_code
                unit_counter += 1
                unit_id = f"9{a:02d}{unit_counter:06d}" + "".join(str(x) for x in rng.integers(0, 10, 24))
                truth_projects.append(TruthProject(
                    None, award.bid_id, a, meta["developer"], part, True, registered, paid, unit_id,
                    commissioned, dur, late, relocated, st, award.pay_tariff,
                    tariff_reduction(late, relocated), loc_end=loc_end,
                ))
    _assign_truth_ids(truth_projects)

    # horizon and market data
    first = Month.of(min(s.date for s in specs.values()))
    last_needed = max(Month.of(s.deadline_expiry) for s in specs.values()).shift(cfg.payment_months)
    horizon = cfg.horizon_end or last_needed
    for p in truth_projects:
        if p.built and Month.of(p.commissioning_date).shift(cfg.payment_months) > horizon:
            raise WorldError(
                f"horizon {horizon} ends before the payment window of unit {p.unit_id} "
                f"(commissioned {p.commissioning_date})"
            )
    months = []
    m = first
    while m <= horizon:
        months.append(m)
        m = m.shift(1)
    span = max(len(months) - 1, 1)
    mvs = []
    pvs = []
    for t, m in enumerate(months):
        season = math.cos(2 * math.pi * (m.month - 7) / 12)
        mv = cfg.mv_start + (cfg.mv_end - cfg.mv_start) * t / span - cfg.mv_seasonal_amp * season
        mv += cfg.mv_noise_sd * float(rng.normal())
        mvs.append(MarketValue(m, round(mv, 3)))
        pv = cfg.pv_index_start + (cfg.pv_index_end - cfg.pv_index_start) * t / span
        pvs.append(PvCostIndex(m, round(pv * (1 + 0.02 * float(rng.normal())), 3)))
    mv_of = {v.month: v.value for v in mvs}

    # units and payments
    units: list[UnitRecord] = []
    payments: list[PaymentRecord] = []
    for p in truth_projects:
        if not p.built:
            continue
        units.append(UnitRecord(
            p.unit_id, p.bid_id if p.registered else None, p.capacity_kw, p.commissioning_date,
            p.loc_end, p.state,
            "",
        ))
        if not p.has_payments:
            continue
        tariff = "MP-FFAV" if p.bid_id.programme is Programme.FFA else "MP-EEG17"
        effective = p.bid - p.reduction
        start = Month.of(p.commissioning_date).shift(1)
        for i in range(cfg.payment_months):
            month = start.shift(i)
            gen = generation_kwh(p.capacity_kw, month, cfg)
            mp = max(0.0, effective - mv_of[month])
            pay = int(round(mp * gen))
            if pay > 0:
                p.n_positive_months += 1
            payments.append(PaymentRecord(p.unit_id, month, tariff, gen, pay))
            if rng.random() < cfg.p_side_payment:
                side = "ANC" if rng.random() < 0.7 else "BON"
                payments.append(PaymentRecord(p.unit_id, month, side, gen, int(rng.integers(100, 5000))))
    address_of = {}
    for r in results.rows:
        address_of.setdefault(r.bid.bid_id, r.bid.developer_address)
    units = [replace(u, developer_address=address_of[u.bid_id] if u.bid_id else "") for u in units]
    units.sort(key=lambda u: u.unit_id)
    payments.sort(key=lambda r: (r.unit_id, r.month, r.tariff_id))

    truth = GroundTruth(truth_projects, _truth_auctions(truth_projects, outcomes))
    return World(cfg, results, outcomes, units, payments, mvs, list(TARIFFS), pvs, truth)


def outcome_sorted(outcome: AwardOutcome):
    return sorted(outcome.awarded, key=lambda a: a.bid_id)


def _renorm(probs, states, drop):
    p = np.array([probs[i] for i, s in enumerate(states) if s != drop])
    return p / p.sum()


def _assign_truth_ids(projects: list[TruthProject]) -> None:
    by_bid: dict[BidId, list[TruthProject]] = {}
    for p in projects:
        by_bid.setdefault(p.bid_id, []).append(p)
    for bid_id, group in by_bid.items():
        visible = sorted((p for p in group if p.built and p.registered),
                         key=lambda p: (p.commissioning_date, p.unit_id))
        for k, p in enumerate(visible, start=1):
            p.project_id = ProjectId(bid_id, k)
        if not visible:
            group[0].project_id = ProjectId(bid_id, 1)


def _truth_auctions(projects: Sequence[TruthProject], outcomes: dict[int, AwardOutcome]) -> list[TruthAuction]:
    out = []
    for a in sorted(outcomes):
        ps = [p for p in projects if p.auction_index == a]
        built = [p for p in ps if p.built]
        ac = outcomes[a].awarded_capacity_kw
        cap = sum(p.capacity_kw for p in built)
        nb = len(built)
        out.append(TruthAuction(
            a, ac, cap, nb,
            cap / ac if ac else None,
            sum(p.relocated for p in built) / nb if nb else None,
            sum(p.late for p in built) / nb if nb else None,
            outcomes[a].weighted_avg_bid,
        ))
    return out


# --------------------------------------------------------------------------
# emission
# --------------------------------------------------------------------------

TRUTH_COLUMNS = (
    "project_id", "bid_id", "auction", "developer", "capacity_kw", "built", "registered",
    "has_payments", "unit_id", "commissioning_date", "duration_days", "late", "relocated",
    "state", "planted_bid_ct_kwh", "reduction_ct_kwh", "positive_premium_months",
)


def write_world(world: World, out_dir: str | Path, split_tso: bool = False) -> list[Path]:
    """Write the register files, ground truth and published averages."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def path(name):
        p = out / name
        written.append(p)
        return p

    write_auction_results(path("auction_results.csv"), world.results)
    write_units(path("unit_register.csv"), world.units)
    if split_tso:
        tsos = ("50hertz", "amprion", "tennet", "transnetbw")
        for i, tso in enumerate(tsos):
            write_payments(path(f"payments_{tso}.csv"),
                           [p for p in world.payments if int(p.unit_id[-1]) % 4 == i])
    else:
        write_payments(path("payments.csv"), world.payments)
    write_market_values(path("market_values.csv"), world.market_values)
    write_tariffs(path("tariffs.csv"), world.tariffs)
    write_pv_index(path("pv_cost_index.csv"), world.pv_index)
    write_csv(path("published_averages.csv"), ("auction_index", "weighted_avg_ct_kwh"),
              ((a, fmt_price(o.weighted_avg_bid)) for a, o in sorted(world.outcomes.items())
               if o.weighted_avg_bid is not None))
    write_csv(path("state_map.csv"), ("postal_prefix", "state"),
              sorted((pre, st) for st, pres in STATE_POSTAL_PREFIXES.items() for pre in pres))
    write_csv(path("ground_truth.csv"), TRUTH_COLUMNS, (
        (
            "" if p.project_id is None else str(p.project_id), str(p.bid_id), p.auction_index,
            p.developer, fmt_num(p.capacity_kw), fmt_num(p.built), fmt_num(p.registered),
            fmt_num(p.has_payments), p.unit_id or "",
            p.commissioning_date.isoformat() if p.commissioning_date else "",
            fmt_num(p.duration_days), fmt_num(p.late), fmt_num(p.relocated), p.state or "",
            fmt_price(p.bid), fmt_price(p.reduction), p.n_positive_months,
        )
        for p in world.truth.projects
    ))
    write_csv(path("ground_truth_auctions.csv"),
              ("auction", "awarded_capacity_kw", "built_capacity_kw", "n_built", "rr", "lchg", "bl",
               "weighted_avg_ct_kwh"),
              ((t.auction_index, fmt_num(t.awarded_capacity_kw), fmt_num(t.built_capacity_kw), t.n_built,
                fmt_num(t.rr), fmt_num(t.lchg), fmt_num(t.bl), fmt_price(t.weighted_avg_bid))
               for t in world.truth.auctions))
    return written


# --------------------------------------------------------------------------
# oracle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffEntry:
    kind: str
    key: str
    field: str
    expected: object
    observed: object


@dataclass
class DiffReport:
    entries: list[DiffEntry] = field(default_factory=list)
    n_projects: int = 0
    n_positive: int = 0
    n_positive_exact: int = 0

    @property
    def passed(self) -> bool:
        return not self.entries

    @property
    def flagged_keys(self) -> set[str]:
        return {e.key for e in self.entries}

    def add(self, *args) -> None:
        self.entries.append(DiffEntry(*args))


def oracle_diff(truth: GroundTruth, link, outcomes=None, metrics=None, tol: float = 1e-9) -> DiffReport:
    """Compare pipeline outputs against the planted world; empty report = pass."""
    if link is None:
        raise WorldError("oracle_diff needs linkage outputs")
    from .linkage import Reliability

    report = DiffReport()
    by_unit = {p.unit_id: p for p in link.projects if p.unit_id is not None}
    by_pid = {p.project_id: p for p in link.projects}
    outcome_of = {o.project_id: o for o in outcomes} if outcomes is not None else {}

    for t in truth.projects:
        if t.project_id is None:
            continue
        key = str(t.project_id)
        report.n_projects += 1
        if not (t.built and t.registered):
            p = by_pid.get(t.project_id)
            if p is None or p.built:
                report.add("status", key, "status", "NotFound", None if p is None else p.status.value)
            continue
        p = by_unit.get(t.unit_id)
        if p is None:
            report.add("status", key, "unit", t.unit_id, None)
            continue
        if p.project_id != t.project_id:
            report.add("identity", key, "project_id", key, str(p.project_id))
        o = outcome_of.get(p.project_id)
        if o is not None:
            for fname, exp in (("dur_days", t.duration_days), ("pen_loc", int(t.relocated)),
                               ("pen_dline", int(t.late)), ("reg", _reg_of(t.state))):
                if getattr(o, fname) != exp:
                    report.add("indicator", key, fname, exp, getattr(o, fname))
        est = link.estimates.get(p.project_id)
        value = None if est is None else est.consolidated_full
        if not t.has_payments:
            if est is None or est.origin not in (Reliability.NO_PAYMENTS, Reliability.PROPAGATED):
                report.add("reliability", key, "origin", "NoPayments", None if est is None else est.origin.value)
        elif t.n_positive_months == 0:
            if est is None or est.origin not in (Reliability.ZERO_PREMIUM, Reliability.PROPAGATED):
                report.add("reliability", key, "origin", "ZeroPremium", None if est is None else est.origin.value)
        else:
            report.n_positive += 1
            if value is None:
                report.add("bid_value", key, "consolidated_full", t.bid,
                           None if est is None else est.reliability.value)
                continue
        if value is not None:
            if abs(value - t.bid) > tol:
                report.add("bid_value", key, "consolidated_full", t.bid, value)
            elif t.n_positive_months > 0 and t.has_payments:
                report.n_positive_exact += 1

    if metrics is not None:
        by_a = {m.auction_index: m for m in metrics}
        for ta in truth.auctions:
            m = by_a.get(ta.auction_index)
            if m is None:
                report.add("metric", f"AU{ta.auction_index}", "missing", "present", None)
                continue
            for fname in ("rr", "lchg", "bl"):
                exp, obs = getattr(ta, fname), getattr(m, fname)
                if (exp is None) != (obs is None) or (exp is not None and abs(exp - obs) > tol):
                    report.add("metric", f"AU{ta.auction_index}", fname, exp, obs)
    return report


def _reg_of(state):
    from .metrics import reg

    return reg(state)


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------


def config_from_mapping(data: dict) -> WorldConfig:
    """Build a WorldConfig from a parsed ``[synth]`` table.

    Dates are ISO strings or TOML dates; ``horizon_end`` is ``YYYY-MM``;
    ``auctions`` is a list of tables with index/date/tendered_kw/pricing_rule/ceiling.
    """
    known = {f.name for f in fields(WorldConfig)}
    unknown = set(data) - known
    if unknown:
        raise WorldError(f"unknown synth config key(s): {', '.join(sorted(unknown))}")
    kw = dict(data)
    if "start_date" in kw:
        kw["start_date"] = _as_date(kw["start_date"])
    if "horizon_end" in kw and kw["horizon_end"] is not None:
        kw["horizon_end"] = Month.parse(str(kw["horizon_end"]))
    for name in ("uniform_price_auctions", "bids_per_auction"):
        if name in kw:
            kw[name] = tuple(kw[name])
    if kw.get("cancel_by_auction") is not None:
        kw["cancel_by_auction"] = {int(k): float(v) for k, v in kw["cancel_by_auction"].items()}
    if "auctions" in kw and kw["auctions"] is not None:
        kw["auctions"] = [
            AuctionPlan(int(a["index"]), _as_date(a["date"]), float(a["tendered_kw"]),
                        PricingRule(a.get("pricing_rule", "PayAsBid")), float(a.get("ceiling", 11.29)))
            for a in kw["auctions"]
        ]
    return WorldConfig(**kw)


def _as_date(v) -> date:
    return v if isinstance(v, date) else date.fromisoformat(str(v))
