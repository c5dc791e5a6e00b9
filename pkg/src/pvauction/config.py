"""TOML run configuration.

Recognised tables and keys::

    [synth]      any WorldConfig field (see synth.WorldConfig)
    [linkage]    tau
    [clearing]   marginal = "full" | "curtail" | "reject"
    [analysis]   small_threshold_kw, duration_auctions, bid_auctions,
                 min_group_size, ranges = [["AU1-AU8", 1, 8], ...],
                 validation_bound
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .clearing import MARGINAL_RULES
from .hypotheses import SuiteConfig
from .linkage import DEFAULT_TAU
from .metrics import DEFAULT_RANGES, DEFAULT_SMALL_THRESHOLD_KW
from .report import DEFAULT_VALIDATION_BOUND
from .synth import WorldConfig, config_from_mapping


class ConfigError(ValueError):
    pass


@dataclass
class AnalysisConfig:
    small_threshold_kw: float = DEFAULT_SMALL_THRESHOLD_KW
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    ranges: tuple[tuple[str, int, int], ...] = DEFAULT_RANGES
    validation_bound: float = DEFAULT_VALIDATION_BOUND


@dataclass
class RunConfig:
    synth: WorldConfig = field(default_factory=WorldConfig)
    tau: float = DEFAULT_TAU
    marginal: str = "full"
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    source: Path | None = None


_TABLES = {"synth", "linkage", "clearing", "analysis"}


def _take(table: dict, name: str, allowed: set[str]) -> dict:
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"[{name}]: unknown key(s) {', '.join(sorted(extra))}")
    return table


def parse_config(data: dict, source: Path | None = None) -> RunConfig:
    extra = set(data) - _TABLES
    if extra:
        raise ConfigError(f"unknown table(s) {', '.join(sorted(extra))}")
    cfg = RunConfig(source=source)
    try:
        if "synth" in data:
            cfg.synth = config_from_mapping(data["synth"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[synth]: {exc}") from None
    link = _take(data.get("linkage", {}), "linkage", {"tau"})
    if "tau" in link:
        cfg.tau = float(link["tau"])
        if cfg.tau < 0:
            raise ConfigError("[linkage] tau must be non-negative")
    clearing = _take(data.get("clearing", {}), "clearing", {"marginal"})
    if "marginal" in clearing:
        if clearing["marginal"] not in MARGINAL_RULES:
            raise ConfigError(f"[clearing] marginal must be one of {', '.join(MARGINAL_RULES)}")
        cfg.marginal = clearing["marginal"]
    an = _take(data.get("analysis", {}), "analysis", {
        "small_threshold_kw", "duration_auctions", "bid_auctions", "min_group_size", "ranges", "validation_bound",
    })
    a = cfg.analysis
    if "small_threshold_kw" in an:
        a.small_threshold_kw = float(an["small_threshold_kw"])
    suite = {}
    for key in ("duration_auctions", "bid_auctions"):
        if key in an:
            lo, hi = an[key]
            suite[key] = (int(lo), int(hi))
    if "min_group_size" in an:
        suite["min_group_size"] = int(an["min_group_size"])
    if suite:
        a.suite = SuiteConfig(**suite)
    if "ranges" in an:
        try:
            a.ranges = tuple((str(lbl), int(lo), int(hi)) for lbl, lo, hi in an["ranges"])
        except (TypeError, ValueError):
            raise ConfigError("[analysis] ranges must be a list of [label, first, last]") from None
    if "validation_bound" in an:
        a.validation_bound = float(an["validation_bound"])
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{p}: config file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return parse_config(data, p)
