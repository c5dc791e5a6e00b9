"""Command-line entry point.

Subcommands::

    simulate   re-clear auctions from an auction-results file
    synth      generate a synthetic world (register files + ground truth)
    link       identify projects and reconstruct bid values
    analyze    metrics, aggregates, hypothesis tests, regression
    validate   compare reconstructed averages with published ones
    report     link + analyze (+ validate) in one run

Each run writes ``manifest-<command>.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .clearing import ClearingError, clear_auction, observed_outcomes
from .config import ConfigError, RunConfig, load_config
from .hypotheses import hypothesis_suite
from .linkage import LinkageError, aggregate_developers, run_linkage
from .metrics import MetricsError, all_auction_metrics, programme_aggregates, project_outcomes
from .registers import (
    DEFAULT_FILES,
    RegisterError,
    fmt_num,
    fmt_price,
    load_auction_results,
    load_register_dir,
    load_state_map,
    write_csv,
)
from .report import (
    ReportError,
    load_bid_values,
    load_projects,
    load_published_averages,
    validate,
    write_aggregates,
    write_auction_metrics,
    write_hypotheses,
    write_linkage_outputs,
    write_outcomes,
    write_plot_series,
    write_regression,
    write_summary,
    write_validation,
)
from .stats import StatsError
from .synth import WorldError, generate_world, write_world

logger = logging.getLogger("pvauction")

KNOWN_ERRORS = (RegisterError, ClearingError, LinkageError, MetricsError, StatsError, ReportError,
                WorldError, ConfigError, FileNotFoundError)


class Run:
    """Collects inputs, outputs and diagnostics for the manifest."""

    def __init__(self, command: str, args, config: RunConfig):
        self.command = command
        self.out = Path(args.out)
        self.config_path = args.config
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.warnings: list[str] = []
        self.errors: list[str] = []
        self.seed: int | None = None

    def add_input(self, role: str, path: Path) -> None:
        path = Path(path)
        if path.exists():
            self.inputs[f"{role}/{path.name}"] = _digest(path)

    def add_register_inputs(self, directory: Path) -> None:
        for p in sorted(Path(directory).glob("*.csv")):
            if p.name in DEFAULT_FILES.values() or p.name.startswith("payments_"):
                self.add_input("registers", p)

    def manifest(self) -> dict:
        outs = sorted(set(self.outputs))
        return {
            "command": self.command,
            "config": None if self.config_path is None else Path(self.config_path).name,
            "config_digest": None if self.config_path is None else _digest(Path(self.config_path)),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {p.relative_to(self.out).as_posix(): _digest(p) for p in outs if p.exists()},
            "seed": self.seed,
            "output_dir": ".",
            "tool_version": __version__,
            "status": "error" if self.errors else "ok",
            "errors": self.errors,
            "n_warnings": len(self.warnings),
        }

    def write_manifest(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"manifest-{self.command}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _state_map(args):
    return load_state_map(args.state_map) if args.state_map else None


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args, run: Run) -> None:
    path = Path(args.auction_results)
    run.add_input("inputs", path)
    results = load_auction_results(path)
    observed = observed_outcomes(results)
    run.out.mkdir(parents=True, exist_ok=True)
    summary = []
    for a in sorted(results.specs):
        spec = results.specs[a]
        bids = [r.bid for r in results.bids(a)]
        outcome = clear_auction(spec, bids, marginal=run.config.marginal)
        awarded = {x.bid_id: x for x in outcome.awarded}
        rejected = set(outcome.rejected)
        p = run.out / f"awards_AU{a}.csv"
        write_csv(p, ("bid_id", "capacity_kw", "price_ct_kwh", "awarded", "awarded_kw", "pay_tariff_ct_kwh",
                      "over_ceiling"), (
            (str(b.bid_id), fmt_num(b.capacity_kw), fmt_price(b.price), fmt_num(b.bid_id in awarded),
             fmt_num(awarded[b.bid_id].capacity_kw) if b.bid_id in awarded else "",
             fmt_price(awarded[b.bid_id].pay_tariff) if b.bid_id in awarded else "",
             fmt_num(b.bid_id in rejected))
            for b in sorted(bids, key=lambda b: b.bid_id)
        ))
        run.outputs.append(p)
        obs_ids = {x.bid_id for x in observed[a].awarded}
        mismatch = len(obs_ids ^ set(awarded))
        if mismatch:
            run.warnings.append(f"AU{a}: {mismatch} bid(s) differ from the published award flags")
        summary.append((
            a, spec.pricing_rule.value, fmt_num(spec.tendered_capacity_kw), fmt_num(outcome.total_bid_capacity_kw),
            fmt_num(outcome.awarded_capacity_kw), len(outcome.awarded), len(outcome.rejected),
            fmt_price(outcome.weighted_avg_bid), fmt_price(outcome.min_awarded_bid),
            fmt_price(outcome.max_awarded_bid), mismatch,
        ))
    p = run.out / "clearing_summary.csv"
    write_csv(p, ("auction", "pricing_rule", "tendered_kw", "bid_kw", "awarded_kw", "n_awarded", "n_over_ceiling",
                  "weighted_avg_ct_kwh", "min_awarded_ct_kwh", "max_awarded_ct_kwh", "flag_mismatches"), summary)
    run.outputs.append(p)


def cmd_synth(args, run: Run) -> None:
    cfg = run.config.synth
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    run.seed = cfg.seed
    world = generate_world(cfg)
    run.outputs += write_world(world, run.out, split_tso=args.split_payments)


def _load_registers(args, run: Run):
    reg_dir = Path(args.registers)
    run.add_register_inputs(reg_dir)
    payments = None
    if args.payments:
        payments = [Path(p) for p in args.payments]
        for p in payments:
            run.add_input("payments", p)
    if args.state_map:
        run.add_input("state_map", Path(args.state_map))
    return load_register_dir(reg_dir, payments=payments, state_map=_state_map(args))


def _link(args, run: Run, registers):
    link = run_linkage(registers, tau=run.config.tau)
    run.warnings += link.warnings
    run.outputs += write_linkage_outputs(run.out, registers.results, link)
    return link


def cmd_link(args, run: Run) -> None:
    _link(args, run, _load_registers(args, run))


def _analyze(run: Run, registers, projects, estimates) -> dict:
    an = run.config.analysis
    results = registers.results
    developers, dev_warnings = aggregate_developers(results, projects)
    run.warnings += dev_warnings
    awards = observed_outcomes(results)
    outcomes = project_outcomes(projects, developers, awards, results.specs, estimates,
                                small_threshold_kw=an.small_threshold_kw)
    metrics = all_auction_metrics(outcomes, awards, registers.pv_index, results.specs)
    present = set(results.specs)
    ranges = [r for r in an.ranges if any(r[1] <= a <= r[2] for a in present)]
    aggregates = programme_aggregates(metrics, ranges)
    suite = hypothesis_suite(outcomes, metrics, an.suite)
    for e in suite.entries:
        if e.status != "Tested":
            run.warnings.append(f"{e.hypothesis} untestable: {e.note}")
    out = run.out
    out.mkdir(parents=True, exist_ok=True)
    named = {
        "outcomes.csv": lambda p: write_outcomes(p, outcomes),
        "auction_metrics.csv": lambda p: write_auction_metrics(p, metrics),
        "programme_aggregates.csv": lambda p: write_aggregates(p, aggregates),
        "hypotheses.csv": lambda p: write_hypotheses(p, suite),
        "regression.csv": lambda p: write_regression(p, suite.regression),
    }
    for name, fn in named.items():
        fn(out / name)
        run.outputs.append(out / name)
    run.outputs += write_plot_series(out, outcomes, metrics, awards)
    return {
        "n_projects": len(outcomes),
        "n_built": sum(o.status for o in outcomes),
        "n_bid_sample": sum(o.in_bid_sample for o in outcomes),
        "aggregates": {r.label: {"rr": r.rr, "lchg": r.lchg, "bl": r.bl, "dur_mean_days": r.dur_mean_days,
                                 "net_vs_full_gap": r.net_vs_full_gap} for r in aggregates},
        "hypotheses": {e.hypothesis: {"status": e.status, "p_value": e.p_value} for e in suite.entries},
        "regression": None if suite.regression is None else {
            "coefficients": suite.regression.coefficients, "r_squared": suite.regression.r_squared,
            "residual_se": suite.regression.residual_se, "n": suite.regression.n},
    }


def _load_linkage(run: Run, directory: Path):
    for name in ("projects.csv", "bid_values.csv"):
        run.add_input("linkage", directory / name)
    return load_projects(directory / "projects.csv"), load_bid_values(directory / "bid_values.csv")


def cmd_analyze(args, run: Run) -> None:
    registers = _load_registers(args, run)
    projects, estimates = _load_linkage(run, Path(args.linkage or run.out))
    summary = _analyze(run, registers, projects, estimates)
    summary["warnings"] = len(run.warnings)
    write_summary(run.out / "summary.json", summary)
    run.outputs.append(run.out / "summary.json")


def _validate(run: Run, projects, estimates, published_path: Path) -> list:
    run.add_input("published", published_path)
    published = load_published_averages(published_path)
    rows = validate(projects, estimates, published, run.config.analysis.validation_bound)
    run.out.mkdir(parents=True, exist_ok=True)
    p = run.out / "validation.csv"
    write_validation(p, rows)
    run.outputs.append(p)
    for r in rows:
        if r.flagged:
            run.warnings.append(f"AU{r.auction_index}: validation flagged ({r.note or f'gap {r.gap:.4f}'})")
    return rows


def cmd_validate(args, run: Run) -> None:
    projects, estimates = _load_linkage(run, Path(args.linkage or run.out))
    _validate(run, projects, estimates, Path(args.published))


def cmd_report(args, run: Run) -> None:
    registers = _load_registers(args, run)
    link = _link(args, run, registers)
    summary = _analyze(run, registers, link.projects, link.estimates)
    published = Path(args.published) if args.published else Path(args.registers) / "published_averages.csv"
    if published.exists():
        rows = _validate(run, link.projects, link.estimates, published)
        summary["validation_flagged"] = sum(r.flagged for r in rows)
    summary["warnings"] = len(run.warnings)
    write_summary(run.out / "summary.json", summary)
    run.outputs.append(run.out / "summary.json")


COMMANDS = {
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "link": cmd_link,
    "analyze": cmd_analyze,
    "validate": cmd_validate,
    "report": cmd_report,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="seed override for synth")
    common.add_argument("--small-threshold-kw", type=float, help="small-developer size threshold")
    common.add_argument("--state-map", help="postal_prefix,state fallback file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pvauction", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="re-clear auctions from bids")
    p.add_argument("--auction-results", required=True, help="auction_results.csv with specs and bids")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic world")
    p.add_argument("--split-payments", action="store_true", help="write one payment file per TSO")

    for name in ("link", "analyze", "report"):
        p = sub.add_parser(name, parents=[common], help=f"{name} pipeline stage")
        p.add_argument("--registers", required=True, help="directory with the register files")
        p.add_argument("--payments", nargs="+", help="explicit payment files")
        if name == "analyze":
            p.add_argument("--linkage", help="directory with link outputs (default: --out)")
        if name == "report":
            p.add_argument("--published", help="published averages (default: registers/published_averages.csv)")

    p = sub.add_parser("validate", parents=[common], help="check reconstructed averages")
    p.add_argument("--linkage", help="directory with link outputs (default: --out)")
    p.add_argument("--published", required=True, help="published_averages.csv")
    p.add_argument("--bound", type=float, help="flag gaps above this many ct/kWh")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        config = RunConfig()
        run = Run(args.command, args, config)
        run.errors.append(str(exc))
        run.write_manifest()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.small_threshold_kw is not None:
        config.analysis.small_threshold_kw = args.small_threshold_kw
    if getattr(args, "bound", None) is not None:
        config.analysis.validation_bound = args.bound
    run = Run(args.command, args, config)
    if args.config:
        run.add_input("config", Path(args.config))
    try:
        COMMANDS[args.command](args, run)
    except KNOWN_ERRORS as exc:
        run.errors.append(f"{type(exc).__name__}: {exc}")
    for w in run.warnings:
        logger.warning(w)
    run.write_manifest()
    for e in run.errors:
        print(f"error: {e}", file=sys.stderr)
    return 1 if run.errors else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
