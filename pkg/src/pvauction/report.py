"""CSV emitters and loaders for pipeline outputs, plus published-average validation.

Every writer is deterministic: rows are sorted, floats go through the same
formatters as the registers, and nothing time-dependent is written.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clearing import AwardOutcome
from .hypotheses import SuiteReport
from .linkage import (
    PIPELINE_COUNT_COLUMNS,
    BidValueEstimate,
    DeveloperProfile,
    LinkageResult,
    ProjectRecord,
    Reliability,
    Status,
    pipeline_counts,
)
from .metrics import AGGREGATE_COLUMNS, AggregateRow, AuctionMetrics, ProjectOutcome, participation_shares
from .registers import AuctionResults, fmt_num, fmt_price, parse_project_id, write_csv
from .stats import TERMS, RegressionResult

DEFAULT_VALIDATION_BOUND = 0.1


class ReportError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(round(v, 10))
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, date):
        return v.isoformat()
    return str(v)


def _opt(text: str, conv=float):
    return None if text == "" else conv(text)


# --------------------------------------------------------------------------
# linkage outputs
# --------------------------------------------------------------------------

PROJECT_COLUMNS = (
    "project_id", "auction", "status", "capacity_kw", "loc_in", "developer_key",
    "unit_id", "commissioning_date", "loc_out", "state",
)
BID_VALUE_COLUMNS = (
    "project_id", "auction", "reliability", "origin", "consolidated_net_ct_kwh", "consolidated_full_ct_kwh",
    "payments_found", "positive_months", "zero_months", "skipped_generation", "skipped_market_value",
)
DEVELOPER_COLUMNS = ("developer_key", "canonical_address", "member_names", "n_built_projects", "size_kw",
                     "first_win_auction")


def write_projects(path, projects: Iterable[ProjectRecord]) -> None:
    write_csv(path, PROJECT_COLUMNS, (
        (str(p.project_id), p.auction_index, p.status.value, fmt_num(p.capacity_kw), p.loc_in, p.developer_key,
         p.unit_id or "", _fmt(p.commissioning_date), p.loc_out or "", p.state or "")
        for p in sorted(projects, key=lambda p: p.project_id)
    ))


def write_bid_values(path, projects: Iterable[ProjectRecord], estimates: Mapping) -> None:
    rows = []
    for p in sorted(projects, key=lambda p: p.project_id):
        e = estimates.get(p.project_id)
        if e is None:
            continue
        rows.append((
            str(p.project_id), p.auction_index, e.reliability.value, e.origin.value,
            fmt_price(e.consolidated_net), fmt_price(e.consolidated_full), fmt_num(e.payments_found),
            len(e.monthly_full), e.zero_months, e.skipped_generation, e.skipped_market_value,
        ))
    write_csv(path, BID_VALUE_COLUMNS, rows)


def write_developers(path, developers: Mapping[str, DeveloperProfile]) -> None:
    write_csv(path, DEVELOPER_COLUMNS, (
        (d.developer_key, d.canonical_address, "|".join(sorted(d.member_names)), len(d.projects),
         fmt_num(d.size_kw), _fmt(d.first_win_auction))
        for _, d in sorted(developers.items())
    ))


def write_pipeline_counts(path, results: AuctionResults, link: LinkageResult) -> None:
    rows = pipeline_counts(results, link)
    write_csv(path, PIPELINE_COUNT_COLUMNS,
              ([r[c] if isinstance(r[c], str) else fmt_num(r[c]) for c in PIPELINE_COUNT_COLUMNS] for r in rows))


def write_linkage_outputs(out_dir, results: AuctionResults, link: LinkageResult) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / n for n in ("projects.csv", "bid_values.csv", "developers.csv", "pipeline_counts.csv",
                               "linkage_warnings.csv")]
    write_projects(paths[0], link.projects)
    write_bid_values(paths[1], link.projects, link.estimates)
    write_developers(paths[2], link.developers)
    write_pipeline_counts(paths[3], results, link)
    write_csv(paths[4], ("message",), ((w,) for w in link.warnings))
    return paths


def _read(path) -> list[dict[str, str]]:
    p = Path(path)
    if not p.exists():
        raise ReportError(f"{p}: missing pipeline output")
    with open(p, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_projects(path) -> list[ProjectRecord]:
    out = []
    for r in _read(path):
        out.append(ProjectRecord(
            project_id=parse_project_id(r["project_id"]),
            auction_index=int(r["auction"]),
            status=Status(r["status"]),
            capacity_kw=float(r["capacity_kw"]),
            loc_in=r["loc_in"],
            developer_key=r["developer_key"],
            unit_id=r["unit_id"] or None,
            commissioning_date=_opt(r["commissioning_date"], date.fromisoformat),
            loc_out=r["loc_out"] or None,
            state=r["state"] or None,
        ))
    return out


def load_bid_values(path) -> dict:
    """Consolidated estimates (monthly series are not persisted)."""
    out = {}
    for r in _read(path):
        pid = parse_project_id(r["project_id"])
        out[pid] = BidValueEstimate(
            pid,
            consolidated_net=_opt(r["consolidated_net_ct_kwh"]),
            consolidated_full=_opt(r["consolidated_full_ct_kwh"]),
            reliability=Reliability(r["reliability"]),
            origin=Reliability(r["origin"]),
            payments_found=r["payments_found"] == "true",
            zero_months=int(r["zero_months"]),
            skipped_generation=int(r["skipped_generation"]),
            skipped_market_value=int(r["skipped_market_value"]),
        )
    return out


# --------------------------------------------------------------------------
# analysis outputs
# --------------------------------------------------------------------------

OUTCOME_COLUMNS = tuple(f.name for f in fields(ProjectOutcome))
METRIC_COLUMNS = tuple(f.name for f in fields(AuctionMetrics))
HYPOTHESIS_COLUMNS = ("hypothesis", "description", "method", "sample", "status", "statistic", "p_value",
                      "n_a", "n_b", "mean_a", "mean_b", "reject_1pct", "reject_5pct", "note")


def write_outcomes(path, outcomes: Sequence[ProjectOutcome]) -> None:
    write_csv(path, OUTCOME_COLUMNS, ([_fmt(getattr(o, c)) for c in OUTCOME_COLUMNS] for o in outcomes))


def write_auction_metrics(path, metrics: Sequence[AuctionMetrics]) -> None:
    write_csv(path, METRIC_COLUMNS, ([_fmt(getattr(m, c)) for c in METRIC_COLUMNS] for m in metrics))


def write_aggregates(path, rows: Sequence[AggregateRow]) -> None:
    write_csv(path, AGGREGATE_COLUMNS, ([_fmt(getattr(r, c)) for c in AGGREGATE_COLUMNS] for r in rows))


def write_hypotheses(path, suite: SuiteReport) -> None:
    def rej(e, alpha):
        r = e.rejects(alpha)
        return "" if r is None else int(r)

    write_csv(path, HYPOTHESIS_COLUMNS, (
        (e.hypothesis, e.description, e.method, e.sample, e.status, _fmt(e.statistic), _fmt(e.p_value),
         _fmt(e.n_a), _fmt(e.n_b), _fmt(e.mean_a), _fmt(e.mean_b), rej(e, 0.01), rej(e, 0.05), e.note)
        for e in suite.entries
    ))


def significance_stars(p: float | None) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    return ""


def write_regression(path, reg: RegressionResult | None) -> None:
    """Coefficient table: estimate, std error, t value, p value, stars; then fit statistics."""
    header = ("term", "estimate", "std_error", "t_value", "p_value", "signif")
    if reg is None:
        write_csv(path, header, ())
        return
    rows = [(t, _fmt(reg.coefficients[t]), _fmt(reg.std_errors[t]), _fmt(reg.t_values[t]),
             _fmt(reg.p_values[t]), significance_stars(reg.p_values[t])) for t in TERMS]
    rows += [
        ("residual_se", _fmt(reg.residual_se), "", "", "", ""),
        ("df", reg.df, "", "", "", ""),
        ("r_squared", _fmt(reg.r_squared), "", "", "", ""),
        ("adj_r_squared", _fmt(reg.adj_r_squared), "", "", "", ""),
        ("f_statistic", _fmt(reg.f_statistic), "", "", _fmt(reg.f_p_value), significance_stars(reg.f_p_value)),
        ("n", reg.n, "", "", "", ""),
    ]
    write_csv(path, header, rows)


# plot-ready series -------------------------------------------------------


def realisation_series(metrics: Sequence[AuctionMetrics]) -> list[tuple]:
    return [(m.auction_index, m.awarded_capacity_kw, m.built_capacity_kw, m.rr) for m in metrics]


def duration_series(outcomes: Sequence[ProjectOutcome]) -> list[tuple]:
    return [(o.auction_index, str(o.project_id), o.dur_days, o.capacity_kw)
            for o in outcomes if o.status]


def realisation_by_duration(outcomes: Sequence[ProjectOutcome], awards: Mapping[int, AwardOutcome]) -> list[tuple]:
    """Cumulative share of awarded capacity and of built projects realised by each duration."""
    ac = sum(a.awarded_capacity_kw for a in awards.values())
    built = sorted((o for o in outcomes if o.status), key=lambda o: (o.dur_days, str(o.project_id)))
    n = len(built)
    rows, cap, k = [], 0.0, 0
    by_day = defaultdict(list)
    for o in built:
        by_day[o.dur_days].append(o)
    for d in sorted(by_day):
        for o in by_day[d]:
            cap += o.capacity_kw
            k += 1
        rows.append((d, cap / ac if ac else None, k / n if n else None))
    return rows


def bid_value_series(outcomes: Sequence[ProjectOutcome], awards: Mapping[int, AwardOutcome]) -> list[tuple]:
    """Per auction: mean/min/max of full and net bid values over the bid sample."""
    rows = []
    groups = defaultdict(list)
    for o in outcomes:
        if o.in_bid_sample and o.bv_full is not None:
            groups[o.auction_index].append(o)
    for a in sorted(groups):
        full = [o.bv_full for o in groups[a]]
        net = [o.bv_net for o in groups[a] if o.bv_net is not None]
        rows.append((
            a, len(full), sum(full) / len(full), min(full), max(full),
            sum(net) / len(net) if net else None, min(net) if net else None, max(net) if net else None,
            awards[a].max_awarded_bid if a in awards else None,
        ))
    return rows


def write_plot_series(out_dir, outcomes, metrics, awards) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = [
        ("series_realisation_rate.csv", ("auction", "awarded_capacity_kw", "built_capacity_kw", "rr"),
         realisation_series(metrics)),
        ("series_duration.csv", ("auction", "project_id", "dur_days", "capacity_kw"), duration_series(outcomes)),
        ("series_realisation_by_duration.csv", ("dur_days", "cum_capacity_share", "cum_project_share"),
         realisation_by_duration(outcomes, awards)),
        ("series_bid_values.csv", ("auction", "n", "full_mean", "full_min", "full_max", "net_mean", "net_min",
                                   "net_max", "marginal_bid"), bid_value_series(outcomes, awards)),
        ("series_participation.csv", ("auction", "n_developers", "new_share", "small_share"),
         [(s["auction"], s["n_developers"], s["new_share"], s["small_share"]) for s in participation_shares(outcomes)]),
    ]
    paths = []
    for name, header, rows in specs:
        write_csv(out / name, header, ([_fmt(v) for v in r] for r in rows))
        paths.append(out / name)
    return paths


def write_summary(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_fmt)
        fh.write("\n")


# --------------------------------------------------------------------------
# validation against published averages
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationRow:
    auction_index: int
    n_projects: int
    reconstructed: float | None
    published: float | None
    gap: float | None
    flagged: bool
    note: str = ""


def load_published_averages(path) -> dict[int, float]:
    out = {}
    for k, r in enumerate(_read(path), start=2):
        try:
            a = int(r["auction_index"])
            value = float(r["weighted_avg_ct_kwh"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ReportError(f"{path}:{k}: bad published-average row ({exc})") from None
        if a in out:
            raise ReportError(f"{path}:{k}: duplicate auction {a}")
        out[a] = value
    return out


def reconstructed_averages(projects: Sequence[ProjectRecord], estimates: Mapping) -> dict[int, tuple[int, float]]:
    """Capacity-weighted mean of consolidated full bid values per auction."""
    acc: dict[int, list[float]] = defaultdict(lambda: [0, 0.0, 0.0])
    for p in projects:
        e = estimates.get(p.project_id)
        if e is None or e.consolidated_full is None:
            continue
        row = acc[p.auction_index]
        row[0] += 1
        row[1] += p.capacity_kw * e.consolidated_full
        row[2] += p.capacity_kw
    return {a: (int(v[0]), v[1] / v[2]) for a, v in acc.items() if v[2] > 0}


def validate(
    projects: Sequence[ProjectRecord],
    estimates: Mapping,
    published: Mapping[int, float],
    bound: float = DEFAULT_VALIDATION_BOUND,
) -> list[ValidationRow]:
    """Compare reconstructed averages against published ones; flag gaps above ``bound``."""
    recon = reconstructed_averages(projects, estimates)
    rows = []
    for a in sorted(set(recon) | set(published)):
        if a not in recon:
            rows.append(ValidationRow(a, 0, None, published[a], None, True, "no reconstructed bid values"))
        elif a not in published:
            rows.append(ValidationRow(a, recon[a][0], recon[a][1], None, None, True, "no published average"))
        else:
            gap = abs(recon[a][1] - published[a])
            rows.append(ValidationRow(a, recon[a][0], recon[a][1], published[a], gap, gap > bound))
    return rows


def write_validation(path, rows: Sequence[ValidationRow]) -> None:
    write_csv(path, ("auction", "n_projects", "reconstructed_ct_kwh", "published_ct_kwh", "abs_gap", "flagged", "note"),
              ((r.auction_index, r.n_projects, _fmt(r.reconstructed), _fmt(r.published), _fmt(r.gap),
                int(r.flagged), r.note) for r in rows))
