"""Hand-sized register fixtures shared by the test modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

from pvauction.clearing import REDUCTION_CT_KWH
from pvauction.registers import (
    AuctionResultRow,
    AuctionResults,
    AuctionSpec,
    BidId,
    Month,
    PaymentRecord,
    PricingRule,
    Programme,
    RegisterSet,
    SubmittedBid,
    TariffCategory,
    TariffEntry,
    UnitRecord,
)

MP = "MP-FFAV"
TARIFFS = {
    MP: TariffEntry(MP, "market premium", TariffCategory.MARKET_PREMIUM),
    "ANC": TariffEntry("ANC", "avoided network charges", TariffCategory.SIDE_PAYMENT),
}
MV = 3.0  # flat market value used by the fixtures, ct/kWh
GEN = 100_000  # kWh per month


def make_spec(a=1, d=date(2015, 4, 15), tc=150_000.0, rule=PricingRule.PAY_AS_BID, ceiling=11.29):
    return AuctionSpec(a, d, tc, rule, ceiling, d + timedelta(days=6))


def make_bid(seq, cap=1000.0, price=5.0, *, year=15, rnd=1, name=None, addr=None, postal="80331", docs=False):
    return SubmittedBid(
        BidId(Programme.FFA, year, rnd, seq),
        name or f"Bidder {seq} GmbH",
        addr if addr is not None else f"Weg {seq}, 80331 Muenchen",
        cap, price, postal, docs,
    )


def uid(n: int) -> str:
    return f"{n:033d}"


@dataclass
class UnitPlan:
    """One commissioned (or missing) project under a bid."""

    capacity_kw: float
    late: bool = False
    relocated: bool = False
    payments: str = "ok"  # ok | none | unstable | zero
    registered: bool = True
    state: str = "Bavaria"
    months: int = 6


@dataclass
class BidPlan:
    price: float
    units: list[UnitPlan] = field(default_factory=list)
    capacity_kw: float | None = None
    addr: str | None = None
    paid: float | None = None  # awarded tariff if it differs from the bid (uniform price)


def build_registers(plans_by_auction, rules=None, mv=MV, gen=GEN, tc=None) -> RegisterSet:
    """Assemble a RegisterSet whose payments invert the bid reconstruction."""
    rules = rules or {}
    specs, rows, units, payments = {}, [], [], []
    n_unit = 0
    for a, plans in sorted(plans_by_auction.items()):
        d = date(2015, 4, 15) + timedelta(days=120 * (a - 1))
        cap_total = sum(p.capacity_kw or sum(u.capacity_kw for u in p.units) or 1000.0 for p in plans)
        spec = make_spec(a, d, tc or cap_total, rules.get(a, PricingRule.PAY_AS_BID))
        specs[a] = spec
        for seq, plan in enumerate(plans, start=1):
            cap = plan.capacity_kw or sum(u.capacity_kw for u in plan.units) or 1000.0
            b = make_bid(seq, min(max(cap, 750.0), 10_000.0), plan.price, year=d.year % 100, rnd=a,
                         addr=plan.addr)
            rows.append(AuctionResultRow(a, b, True))
            for k, u in enumerate(plan.units):
                n_unit += 1
                if not u.registered:
                    continue
                dur = 600 if u.late else 300
                commissioned = spec.first_announcement + timedelta(days=dur + k)
                postal = "80999" if u.relocated else b.postal_code
                units.append(UnitRecord(uid(n_unit), b.bid_id, u.capacity_kw, commissioned, postal, u.state))
                if u.payments == "none":
                    continue
                red = REDUCTION_CT_KWH * (u.late + u.relocated)
                start = Month.of(commissioned).shift(1)
                for i in range(u.months):
                    tariff = plan.price if plan.paid is None else plan.paid
                    mp = max(0.0, tariff - red - mv)
                    if u.payments == "zero":
                        mp = 0.0
                    elif u.payments == "unstable" and i == u.months - 1:
                        mp += 0.25
                    payments.append(PaymentRecord(uid(n_unit), start.shift(i), MP, gen, round(mp * gen)))
    months = {}
    m = Month(2015, 1)
    while m <= Month(2024, 12):
        months[m] = mv
        m = m.shift(1)
    return RegisterSet(AuctionResults(specs, rows), units, payments, months, dict(TARIFFS), {})


def au1_availability_plans() -> list[BidPlan]:
    """25 awarded bids / 37 projects: 36 unit ids, 35 with payments, 34 reliable."""
    plans = []
    price = 8.0
    for k in range(12):  # single-unit bids
        payments = "unstable" if k == 0 else "ok"
        plans.append(BidPlan(round(price + 0.05 * k, 2), [UnitPlan(6280.0, late=k % 3 == 0, relocated=k % 2 == 0,
                                                                      payments=payments)]))
    for k in range(12):  # two-unit bids
        first = UnitPlan(3140.0, relocated=k % 2 == 1, payments="none" if k == 0 else "ok")
        plans.append(BidPlan(round(price + 0.6 + 0.05 * k, 2), [first, UnitPlan(3140.0, late=k % 4 == 0)]))
    plans.append(BidPlan(9.0, [UnitPlan(6280.0, registered=False)], capacity_kw=6280.0))
    return plans


@dataclass
class Analysis:
    link: object
    awards: dict
    outcomes: list
    metrics: list


def analyze(regs: RegisterSet, small_threshold_kw: float = 2000.0) -> Analysis:
    """Run linkage and the per-project / per-auction indicators in one go."""
    from pvauction.clearing import observed_outcomes
    from pvauction.linkage import run_linkage
    from pvauction.metrics import all_auction_metrics, project_outcomes

    link = run_linkage(regs)
    awards = observed_outcomes(regs.results)
    outs = project_outcomes(link.projects, link.developers, awards, regs.results.specs, link.estimates,
                            small_threshold_kw=small_threshold_kw)
    metrics = all_auction_metrics(outs, awards, regs.pv_index, regs.results.specs)
    return Analysis(link, awards, outs, metrics)


def write_registers(regs: RegisterSet, out) -> None:
    """Emit a RegisterSet with the standard file names."""
    from pvauction.registers import (
        MarketValue,
        write_auction_results,
        write_market_values,
        write_payments,
        write_tariffs,
        write_units,
    )

    out.mkdir(parents=True, exist_ok=True)
    write_auction_results(out / "auction_results.csv", regs.results)
    write_units(out / "unit_register.csv", regs.units)
    write_payments(out / "payments.csv", regs.payments)
    write_market_values(out / "market_values.csv", [MarketValue(m, v) for m, v in sorted(regs.market_values.items())])
    write_tariffs(out / "tariffs.csv", regs.tariffs.values())
