"""Data model and CSV loaders for the five public data sources.

Every register lives in one UTF-8 CSV file with a fixed header. Loading
type-checks each row against the record invariants and never drops a row
silently: rejected rows are kept with a diagnostic naming row and field.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

MIN_BID_KW = 750.0
MAX_BID_KW = 10_000.0
PRICE_DIGITS = 4


class RegisterError(ValueError):
    """Raised for unreadable or invalid register files."""


class Programme(str, Enum):
    FFA = "FFA"  # ground-mounted pilot (FFAV)
    SOL = "SOL"  # RES Act 2017 solar


class PricingRule(str, Enum):
    PAY_AS_BID = "PayAsBid"
    UNIFORM_PRICE = "UniformPrice"


class TariffCategory(str, Enum):
    MARKET_PREMIUM = "MarketPremium"
    SIDE_PAYMENT = "SidePayment"


STATES = (
    "Baden-Wuerttemberg",
    "Bavaria",
    "Berlin",
    "Brandenburg",
    "Bremen",
    "Hamburg",
    "Hesse",
    "Lower Saxony",
    "Mecklenburg-Western Pomerania",
    "North-Rhine Westphalia",
    "Rhineland-Palatinate",
    "Saarland",
    "Saxony",
    "Saxony-Anhalt",
    "Schleswig-Holstein",
    "Thuringia",
)


# --------------------------------------------------------------------------
# identifiers
# --------------------------------------------------------------------------

_BID_RE = re.compile(r"^([A-Z]+)(\d+)-(\d+)/(\d+)$")


@dataclass(frozen=True, order=True)
class BidId:
    programme: Programme
    year: int
    round: int
    sequence: int

    def __post_init__(self):
        if not 0 <= self.year <= 99:
            raise ValueError(f"bid id year must have two digits, got {self.year}")
        if self.round < 1:
            raise ValueError(f"bid id round must be >= 1, got {self.round}")
        if self.sequence < 1:
            raise ValueError(f"bid id sequence must be >= 1, got {self.sequence}")

    def __str__(self) -> str:
        return f"{self.programme.value}{self.year:02d}-{self.round}/{self.sequence:03d}"


def parse_bid_id(text: str) -> BidId:
    """Parse ``FFA15-1/129`` style codes; errors name the offending field."""
    m = _BID_RE.match(text)
    if m is None:
        if "/" not in text or "-" not in text:
            raise RegisterError(f"bid id {text!r}: expected <programme><yy>-<round>/<sequence>")
        head, _, seq = text.rpartition("/")
        if not seq.isdigit():
            raise RegisterError(f"bid id {text!r}: sequence {seq!r} is not numeric")
        prog_year, _, rnd = head.rpartition("-")
        if not rnd.isdigit():
            raise RegisterError(f"bid id {text!r}: round {rnd!r} is not numeric")
        raise RegisterError(f"bid id {text!r}: malformed programme/year {prog_year!r}")
    prog, year, rnd, seq = m.groups()
    try:
        programme = Programme(prog)
    except ValueError:
        raise RegisterError(f"bid id {text!r}: unknown programme {prog!r}") from None
    if len(year) != 2:
        raise RegisterError(f"bid id {text!r}: year {year!r} must have two digits")
    try:
        return BidId(programme, int(year), int(rnd), int(seq))
    except ValueError as exc:
        raise RegisterError(f"bid id {text!r}: {exc}") from None


@dataclass(frozen=True, order=True)
class ProjectId:
    bid: BidId
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"project index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return f"{self.bid}-{self.index}"


def parse_project_id(text: str) -> ProjectId:
    head, sep, idx = text.rpartition("-")
    if not sep or "/" in idx or "/" not in head:
        raise RegisterError(f"project id {text!r}: missing -<index> suffix")
    if not idx.isdigit():
        raise RegisterError(f"project id {text!r}: index {idx!r} is not numeric")
    try:
        return ProjectId(parse_bid_id(head), int(idx))
    except ValueError as exc:
        raise RegisterError(f"project id {text!r}: {exc}") from None


def _check_unit_id(code: str) -> str:
    if len(code) != 33 or not code.isdigit():
        raise ValueError(f"unit id must be 33 decimal digits, got {len(code)} characters")
    return code


def _check_postal(code: str) -> str:
    if len(code) != 5 or not code.isdigit():
        raise ValueError(f"postal code must be 5 digits, got {code!r}")
    return code


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise ValueError(f"must be positive, got {text}")
    return x


def _bid_capacity(text: str) -> float:
    x = float(text)
    if not MIN_BID_KW <= x <= MAX_BID_KW:
        raise ValueError(f"bid capacity {x:g} kW outside [{MIN_BID_KW:g}, {MAX_BID_KW:g}]")
    return x


def _non_negative(text: str) -> float:
    x = float(text)
    if x < 0:
        raise ValueError(f"must be >= 0, got {text}")
    return x


# --------------------------------------------------------------------------
# months and dates
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Month:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = re.match(r"^(\d{4})-(\d{2})$", text)
        if m is None:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def of(cls, d: date) -> "Month":
        return cls(d.year, d.month)

    def shift(self, months: int) -> "Month":
        k = self.year * 12 + (self.month - 1) + months
        return Month(k // 12, k % 12 + 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def add_months(d: date, months: int) -> date:
    """Calendar-month addition clamping to month end (Jan 31 + 1 -> Feb 28/29)."""
    from dateutil.relativedelta import relativedelta

    return d + relativedelta(months=months)


def _parse_date(text: str) -> date:
    return date.fromisoformat(text)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ValueError(f"expected boolean, got {text!r}")


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AuctionSpec:
    auction_index: int
    date: date
    tendered_capacity_kw: float
    pricing_rule: PricingRule
    ceiling_price: float
    first_announcement: date

    def __post_init__(self):
        if self.auction_index < 1:
            raise ValueError("auction_index must be >= 1")
        if not self.tendered_capacity_kw > 0:
            raise ValueError("tendered capacity must be positive")
        if not self.ceiling_price > 0:
            raise ValueError("ceiling price must be positive")

    @property
    def label(self) -> str:
        return f"AU{self.auction_index}"

    @property
    def final_announcement(self) -> date:
        return date.fromordinal(self.first_announcement.toordinal() + 7)

    @property
    def deadline_no_reduction(self) -> date:
        return add_months(self.final_announcement, 18)

    @property
    def deadline_expiry(self) -> date:
        return add_months(self.final_announcement, 24)


@dataclass(frozen=True)
class SubmittedBid:
    bid_id: BidId
    developer_name: str
    developer_address: str
    capacity_kw: float
    price: float  # ct/kWh
    postal_code: str
    land_use_docs: bool = False

    def __post_init__(self):
        if not MIN_BID_KW <= self.capacity_kw <= MAX_BID_KW:
            raise ValueError(
                f"bid capacity {self.capacity_kw} kW outside [{MIN_BID_KW:g}, {MAX_BID_KW:g}]"
            )
        if not self.price > 0:
            raise ValueError(f"bid price must be positive, got {self.price}")
        _check_postal(self.postal_code)


@dataclass(frozen=True)
class AuctionResultRow:
    auction_index: int
    bid: SubmittedBid
    awarded: bool


@dataclass(frozen=True)
class UnitRecord:
    unit_id: str
    bid_id: BidId | None
    capacity_kw: float
    commissioning_date: date
    postal_code: str
    state: str
    developer_address: str = ""

    def __post_init__(self):
        _check_unit_id(self.unit_id)
        if not self.capacity_kw > 0:
            raise ValueError("unit capacity must be positive")
        _check_postal(self.postal_code)
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")


@dataclass(frozen=True)
class PaymentRecord:
    unit_id: str
    month: Month
    tariff_id: str
    generation_kwh: float
    payment_ct: float

    def __post_init__(self):
        _check_unit_id(self.unit_id)
        if self.generation_kwh < 0:
            raise ValueError("generation must be >= 0")


@dataclass(frozen=True)
class TariffEntry:
    tariff_id: str
    description: str
    category: TariffCategory


@dataclass(frozen=True)
class MarketValue:
    month: Month
    value: float  # ct/kWh, may be negative


@dataclass(frozen=True)
class PvCostIndex:
    month: Month
    index_value: float


# --------------------------------------------------------------------------
# auction results container
# --------------------------------------------------------------------------


@dataclass
class AuctionResults:
    """Auction-level specs plus every submitted bid with its award flag."""

    specs: dict[int, AuctionSpec]
    rows: list[AuctionResultRow]

    def bids(self, auction_index: int | None = None, awarded_only: bool = False):
        for r in self.rows:
            if auction_index is not None and r.auction_index != auction_index:
                continue
            if awarded_only and not r.awarded:
                continue
            yield r

    def awarded_by_id(self) -> dict[BidId, AuctionResultRow]:
        return {r.bid.bid_id: r for r in self.rows if r.awarded}


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------


@dataclass
class RowIssue:
    row: int  # 1-based data row number (header excluded)
    field: str
    message: str

    def __str__(self) -> str:
        return f"row {self.row}, field {self.field!r}: {self.message}"


@dataclass
class RegisterTable:
    kind: str
    rows: list
    rejected: list[RowIssue] = field(default_factory=list)
    n_input: int = 0
    sources: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


COLUMNS: dict[str, tuple[str, ...]] = {
    "auction_results": (
        "auction_index", "date", "tendered_kw", "pricing_rule", "ceiling",
        "first_announcement", "bid_id", "developer_name", "developer_address",
        "capacity_kw", "price_ct_kwh", "postal_code", "land_use_docs", "awarded",
    ),
    "unit_register": (
        "unit_id", "bid_id", "capacity_kw", "commissioning_date", "postal_code",
        "state", "developer_address",
    ),
    "payments": ("unit_id", "month", "tariff_id", "generation_kwh", "payment_ct"),
    "market_values": ("month", "value_ct_kwh"),
    "tariffs": ("tariff_id", "description", "category"),
    "pv_cost_index": ("month", "index_value"),
}

DEFAULT_FILES = {
    "auction_results": "auction_results.csv",
    "unit_register": "unit_register.csv",
    "payments": "payments.csv",
    "market_values": "market_values.csv",
    "tariffs": "tariffs.csv",
    "pv_cost_index": "pv_cost_index.csv",
}


def load_state_map(path: str | Path) -> dict[str, str]:
    """Read a ``postal_prefix,state`` fallback file."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            state = row["state"].strip()
            if state not in STATES:
                raise RegisterError(f"{path}: unknown state {state!r}")
            out[row["postal_prefix"].strip()] = state
    return out


def state_for_postal(code: str, state_map: dict[str, str]) -> str | None:
    for k in range(len(code), 0, -1):
        hit = state_map.get(code[:k])
        if hit is not None:
            return hit
    return None


class _Row:
    """Field accessor that remembers which column is being parsed."""

    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.current = ""

    def get(self, name: str, conv=str):
        self.current = name
        return conv(self.raw[name].strip())


def _parse_auction_row(r: _Row, state_map=None):
    spec = AuctionSpec(
        auction_index=r.get("auction_index", int),
        date=r.get("date", _parse_date),
        tendered_capacity_kw=r.get("tendered_kw", _positive),
        pricing_rule=r.get("pricing_rule", PricingRule),
        ceiling_price=r.get("ceiling", _positive),
        first_announcement=r.get("first_announcement", _parse_date),
    )
    bid = SubmittedBid(
        bid_id=r.get("bid_id", parse_bid_id),
        developer_name=r.get("developer_name"),
        developer_address=r.get("developer_address"),
        capacity_kw=r.get("capacity_kw", _bid_capacity),
        price=r.get("price_ct_kwh", _positive),
        postal_code=r.get("postal_code", _check_postal),
        land_use_docs=r.get("land_use_docs", _parse_bool),
    )
    return spec, AuctionResultRow(spec.auction_index, bid, r.get("awarded", _parse_bool))


def _parse_unit_row(r: _Row, state_map=None):
    unit_id = r.get("unit_id", _check_unit_id)
    bid_text = r.get("bid_id")
    bid_id = parse_bid_id(bid_text) if bid_text else None
    capacity = r.get("capacity_kw", _positive)
    commissioned = r.get("commissioning_date", _parse_date)
    postal = r.get("postal_code", _check_postal)
    state = r.get("state")
    if not state and state_map:
        state = state_for_postal(postal, state_map) or ""
    if not state:
        raise ValueError("state missing and not resolvable from postal code")
    if state not in STATES:
        raise ValueError(f"unknown state {state!r}")
    return UnitRecord(unit_id, bid_id, capacity, commissioned, postal, state, r.get("developer_address"))


def _parse_payment_row(r: _Row, state_map=None):
    return PaymentRecord(
        unit_id=r.get("unit_id", _check_unit_id),
        month=r.get("month", Month.parse),
        tariff_id=r.get("tariff_id"),
        generation_kwh=r.get("generation_kwh", _non_negative),
        payment_ct=r.get("payment_ct", float),
    )


def _parse_market_value(r: _Row, state_map=None):
    return MarketValue(r.get("month", Month.parse), r.get("value_ct_kwh", float))


def _parse_tariff(r: _Row, state_map=None):
    return TariffEntry(r.get("tariff_id"), r.get("description"), r.get("category", TariffCategory))


def _parse_pv_index(r: _Row, state_map=None):
    return PvCostIndex(r.get("month", Month.parse), r.get("index_value", float))


_PARSERS = {
    "auction_results": _parse_auction_row,
    "unit_register": _parse_unit_row,
    "payments": _parse_payment_row,
    "market_values": _parse_market_value,
    "tariffs": _parse_tariff,
    "pv_cost_index": _parse_pv_index,
}


def _key(kind: str, rec):
    if kind == "payments":
        return (rec.unit_id, rec.month, rec.tariff_id)
    if kind == "unit_register":
        return rec.unit_id
    if kind in ("market_values", "pv_cost_index"):
        return rec.month
    if kind == "tariffs":
        return rec.tariff_id
    if kind == "auction_results":
        return rec[1].bid.bid_id
    return None


def load_register(
    paths: str | Path | Sequence[str | Path],
    kind: str,
    *,
    strict: bool = True,
    state_map: dict[str, str] | None = None,
) -> RegisterTable:
    """Load and validate one register kind from one or more CSV files.

    Several files of the same kind (e.g. the four TSO payment files) are
    concatenated in the given order and share one uniqueness check.
    With ``strict`` any rejected row raises :class:`RegisterError`.
    """
    if kind not in _PARSERS:
        raise RegisterError(f"unknown register kind {kind!r}")
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parse = _PARSERS[kind]
    table = RegisterTable(kind, [], sources=[str(p) for p in paths])
    seen: dict = {}
    row_no = 0
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in COLUMNS[kind] if c not in header]
            if missing:
                raise RegisterError(f"{path}: missing column(s) {', '.join(missing)}")
            for raw in reader:
                row_no += 1
                table.n_input += 1
                r = _Row(raw)
                try:
                    rec = parse(r, state_map)
                except (ValueError, RegisterError) as exc:
                    table.rejected.append(RowIssue(row_no, r.current, str(exc)))
                    continue
                k = _key(kind, rec)
                if k in seen:
                    key_field = "unit_id,month,tariff_id" if kind == "payments" else r.current
                    table.rejected.append(
                        RowIssue(row_no, key_field, f"duplicate key {_fmt_key(k)} (first at row {seen[k]})")
                    )
                    continue
                seen[k] = row_no
                table.rows.append(rec)
    assert table.n_input == len(table.rows) + len(table.rejected)
    if table.rejected:
        for issue in table.rejected:
            logger.warning("%s: %s", kind, issue)
        if strict:
            first = table.rejected[0]
            raise RegisterError(
                f"{kind}: {len(table.rejected)} invalid row(s); first: {first}"
            )
    return table


def _fmt_key(k) -> str:
    if isinstance(k, tuple):
        return "(" + ", ".join(str(x) for x in k) + ")"
    return str(k)


def load_auction_results(path, *, strict: bool = True) -> AuctionResults:
    table = load_register(path, "auction_results", strict=strict)
    return auction_results_from_rows(table.rows)


def auction_results_from_rows(pairs: Iterable[tuple[AuctionSpec, AuctionResultRow]]) -> AuctionResults:
    specs: dict[int, AuctionSpec] = {}
    rows = []
    for spec, row in pairs:
        prev = specs.setdefault(spec.auction_index, spec)
        if prev != spec:
            raise RegisterError(
                f"auction {spec.auction_index}: inconsistent auction-level columns for bid {row.bid.bid_id}"
            )
        rows.append(row)
    return AuctionResults(specs, rows)


# --------------------------------------------------------------------------
# writing
# --------------------------------------------------------------------------


def fmt_price(x: float | None) -> str:
    return "" if x is None else f"{x:.{PRICE_DIGITS}f}"


def fmt_num(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_auction_results(path, results: AuctionResults) -> None:
    def rows():
        for r in results.rows:
            s = results.specs[r.auction_index]
            b = r.bid
            yield (
                s.auction_index, s.date.isoformat(), fmt_num(s.tendered_capacity_kw),
                s.pricing_rule.value, fmt_price(s.ceiling_price), s.first_announcement.isoformat(),
                str(b.bid_id), b.developer_name, b.developer_address, fmt_num(b.capacity_kw),
                fmt_price(b.price), b.postal_code, fmt_num(b.land_use_docs), fmt_num(r.awarded),
            )

    write_csv(path, COLUMNS["auction_results"], rows())


def write_units(path, units: Iterable[UnitRecord]) -> None:
    write_csv(
        path,
        COLUMNS["unit_register"],
        (
            (u.unit_id, "" if u.bid_id is None else str(u.bid_id), fmt_num(u.capacity_kw),
             u.commissioning_date.isoformat(), u.postal_code, u.state, u.developer_address)
            for u in units
        ),
    )


def write_payments(path, payments: Iterable[PaymentRecord]) -> None:
    write_csv(
        path,
        COLUMNS["payments"],
        ((p.unit_id, str(p.month), p.tariff_id, fmt_num(p.generation_kwh), fmt_num(p.payment_ct))
         for p in payments),
    )


def write_market_values(path, values: Iterable[MarketValue]) -> None:
    write_csv(path, COLUMNS["market_values"], ((str(v.month), fmt_price(v.value)) for v in values))


def write_tariffs(path, tariffs: Iterable[TariffEntry]) -> None:
    write_csv(path, COLUMNS["tariffs"], ((t.tariff_id, t.description, t.category.value) for t in tariffs))


def write_pv_index(path, index: Iterable[PvCostIndex]) -> None:
    write_csv(path, COLUMNS["pv_cost_index"], ((str(p.month), fmt_price(p.index_value)) for p in index))


@dataclass
class RegisterSet:
    """All registers needed by the linkage pipeline, loaded together."""

    results: AuctionResults
    units: list[UnitRecord]
    payments: list[PaymentRecord]
    market_values: dict[Month, float]
    tariffs: dict[str, TariffEntry]
    pv_index: dict[Month, float] = field(default_factory=dict)


def load_register_dir(
    directory: str | Path,
    *,
    payments: Sequence[str | Path] | None = None,
    state_map: dict[str, str] | None = None,
    strict: bool = True,
) -> RegisterSet:
    """Load every register from ``directory`` using the default file names.

    Payment files default to ``payments.csv`` or, when absent, every
    ``payments_*.csv`` file (the per-TSO variants) in sorted order.
    """
    d = Path(directory)
    if payments is None:
        single = d / DEFAULT_FILES["payments"]
        payments = [single] if single.exists() else sorted(d.glob("payments_*.csv"))
        if not payments:
            raise RegisterError(f"{d}: no payment files found")
    results = load_auction_results(d / DEFAULT_FILES["auction_results"], strict=strict)
    units = load_register(d / DEFAULT_FILES["unit_register"], "unit_register", strict=strict, state_map=state_map)
    pays = load_register(payments, "payments", strict=strict)
    mvs = load_register(d / DEFAULT_FILES["market_values"], "market_values", strict=strict)
    tariffs = load_register(d / DEFAULT_FILES["tariffs"], "tariffs", strict=strict)
    pv_path = d / DEFAULT_FILES["pv_cost_index"]
    pv = load_register(pv_path, "pv_cost_index", strict=strict).rows if pv_path.exists() else []
    return RegisterSet(
        results=results,
        units=units.rows,
        payments=pays.rows,
        market_values={m.month: m.value for m in mvs.rows},
        tariffs={t.tariff_id: t for t in tariffs.rows},
        pv_index={p.month: p.index_value for p in pv},
    )
