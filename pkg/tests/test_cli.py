import csv
import json
from pathlib import Path

import pytest

from pvauction import cli
from pvauction.registers import COLUMNS, PricingRule, write_csv
from pvauction.synth import WorldConfig, generate_world, write_world

from builders import BidPlan, UnitPlan, au1_availability_plans, build_registers, write_registers


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def manifest(out, command):
    return json.loads((Path(out) / f"manifest-{command}.json").read_text())


@pytest.fixture(scope="module")
def small_world(tmp_path_factory):
    d = tmp_path_factory.mktemp("world")
    assert cli.main(["synth", "--seed", "5", "--out", str(d)]) == 0
    return d


# -- simulate ----------------------------------------------------------------------


def _results_file(path, rule, bids, tc=10_000, ceiling=11.29):
    base = ["1", "2015-04-15", str(tc), rule, str(ceiling), "2015-04-21"]
    write_csv(path, COLUMNS["auction_results"], [
        base + [f"FFA15-1/{k:03d}", f"Bidder {k}", f"Weg {k}", str(cap), f"{price:.2f}", "80331", "false", "true"]
        for k, (cap, price) in enumerate(bids, start=1)
    ])
    return path


def test_simulate_pay_as_bid(tmp_path):
    src = _results_file(tmp_path / "ar.csv", "PayAsBid", [(4000, 5.0), (4000, 6.0), (4000, 7.0)])
    assert cli.main(["simulate", "--auction-results", str(src), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "awards_AU1.csv")
    assert [r["pay_tariff_ct_kwh"] for r in rows] == ["5.0000", "6.0000", "7.0000"]
    (summary,) = read_csv(tmp_path / "o" / "clearing_summary.csv")
    assert summary["awarded_kw"] == "12000" and summary["flag_mismatches"] == "0"
    m = manifest(tmp_path / "o", "simulate")
    assert m["status"] == "ok" and list(m["inputs"]) == ["inputs/ar.csv"]
    assert set(m["outputs"]) == {"awards_AU1.csv", "clearing_summary.csv"}


def test_simulate_uniform_price_pays_marginal(tmp_path):
    prices = [7.60, 8.00, 8.12, 8.30, 8.49]
    src = _results_file(tmp_path / "ar.csv", "UniformPrice", [(5000, p) for p in prices], tc=25_000)
    assert cli.main(["simulate", "--auction-results", str(src), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "awards_AU1.csv")
    assert {r["pay_tariff_ct_kwh"] for r in rows} == {"8.4900"}
    assert read_csv(tmp_path / "o" / "clearing_summary.csv")[0]["weighted_avg_ct_kwh"] == "8.4900"


def test_simulate_over_ceiling(tmp_path):
    src = _results_file(tmp_path / "ar.csv", "PayAsBid", [(4000, 9.5)], ceiling=9.0)
    # the bid row itself still parses; the ceiling is applied at clearing
    assert cli.main(["simulate", "--auction-results", str(src), "--out", str(tmp_path / "o")]) == 0
    (row,) = read_csv(tmp_path / "o" / "awards_AU1.csv")
    assert row["awarded"] == "false" and row["over_ceiling"] == "true"


def test_simulate_bad_row_fails_with_context(tmp_path, capsys):
    src = _results_file(tmp_path / "ar.csv", "PayAsBid", [(100, 5.0)])
    assert cli.main(["simulate", "--auction-results", str(src), "--out", str(tmp_path / "o")]) == 1
    assert "row 1, field 'capacity_kw'" in capsys.readouterr().err
    m = manifest(tmp_path / "o", "simulate")
    assert m["status"] == "error" and m["errors"]


# -- synth / link / analyze ---------------------------------------------------------------


def test_synth_manifest_records_seed(small_world):
    m = manifest(small_world, "synth")
    assert m["seed"] == 5 and m["command"] == "synth" and m["output_dir"] == "."
    assert "ground_truth.csv" in m["outputs"] and m["tool_version"]


def test_link_writes_outputs_and_passes_oracle(small_world, tmp_path):
    out = tmp_path / "link"
    assert cli.main(["link", "--registers", str(small_world), "--out", str(out)]) == 0
    for name in ("projects.csv", "bid_values.csv", "developers.csv", "pipeline_counts.csv"):
        assert (out / name).exists()
    truth = {r["project_id"]: r for r in read_csv(small_world / "ground_truth.csv") if r["project_id"]}
    checked = 0
    for r in read_csv(out / "bid_values.csv"):
        t = truth[r["project_id"]]
        if int(t["positive_premium_months"]) > 0 and t["has_payments"] == "true":
            assert abs(float(r["consolidated_full_ct_kwh"]) - float(t["planted_bid_ct_kwh"])) <= 1e-9
            checked += 1
    assert checked > 300
    m = manifest(out, "link")
    assert all(k.startswith("registers/") for k in m["inputs"]) and len(m["inputs"]) == 6


def test_link_split_payment_files(tmp_path):
    reg = tmp_path / "reg"
    assert cli.main(["synth", "--seed", "5", "--split-payments", "--out", str(reg)]) == 0
    assert cli.main(["link", "--registers", str(reg), "--out", str(tmp_path / "a")]) == 0
    one = tmp_path / "one"
    write_world(generate_world(WorldConfig(seed=5)), one)
    assert cli.main(["link", "--registers", str(one), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "bid_values.csv").read_bytes() == (tmp_path / "b" / "bid_values.csv").read_bytes()


def test_link_au1_fixture_counts(tmp_path):
    write_registers(build_registers({1: au1_availability_plans()}), tmp_path / "reg")
    assert cli.main(["link", "--registers", str(tmp_path / "reg"), "--out", str(tmp_path / "o")]) == 0
    (row,) = read_csv(tmp_path / "o" / "pipeline_counts.csv")
    stages = [row[k] for k in ("awarded_projects", "built_projects", "payments_found", "bid_values")]
    assert stages == ["37", "36", "35", "35"]


def test_empty_payment_file_flags_all_built(tmp_path):
    write_registers(build_registers({1: au1_availability_plans()}), tmp_path / "reg")
    write_csv(tmp_path / "reg" / "payments.csv", COLUMNS["payments"], [])
    assert cli.main(["link", "--registers", str(tmp_path / "reg"), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "bid_values.csv")
    assert rows and {r["reliability"] for r in rows} == {"NoPayments"}


def test_analyze_after_link(small_world, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["link", "--registers", str(small_world), "--out", str(out)]) == 0
    assert cli.main(["analyze", "--registers", str(small_world), "--out", str(out)]) == 0
    for name in ("outcomes.csv", "auction_metrics.csv", "programme_aggregates.csv", "hypotheses.csv",
                 "regression.csv", "summary.json", "series_realisation_rate.csv", "series_bid_values.csv"):
        assert (out / name).exists(), name
    hyps = read_csv(out / "hypotheses.csv")
    assert len(hyps) == 10 and {h["status"] for h in hyps} <= {"Tested", "Untestable"}
    labels = [r["label"] for r in read_csv(out / "programme_aggregates.csv")]
    assert labels == ["AU1-AU8", "AU9-AU12", "AU1-AU12"]
    m = manifest(out, "analyze")
    assert "linkage/projects.csv" in m["inputs"] and "linkage/bid_values.csv" in m["inputs"]


def test_analyze_without_linkage_outputs_fails(small_world, tmp_path):
    assert cli.main(["analyze", "--registers", str(small_world), "--out", str(tmp_path / "o")]) == 1
    assert manifest(tmp_path / "o", "analyze")["status"] == "error"


def test_single_auction_aggregates_equal_the_auction(tmp_path):
    plans = [BidPlan(6.0 + 0.1 * k, [UnitPlan(1500.0, late=k % 2 == 0, relocated=k % 3 == 0)]) for k in range(6)]
    write_registers(build_registers({1: plans}), tmp_path / "reg")
    assert cli.main(["report", "--registers", str(tmp_path / "reg"), "--out", str(tmp_path / "o")]) == 0
    aggs = read_csv(tmp_path / "o" / "programme_aggregates.csv")
    (met,) = read_csv(tmp_path / "o" / "auction_metrics.csv")
    assert [a["label"] for a in aggs] == ["AU1-AU8", "AU1-AU12"]  # ranges without auctions are dropped
    for agg in aggs:
        for k in ("rr", "bl", "lchg", "dur_mean_days"):
            assert agg[k] == met[k]


def test_untestable_entries_do_not_fail_the_run(tmp_path):
    plans = [BidPlan(6.0, [UnitPlan(1500.0)])]
    write_registers(build_registers({1: plans}), tmp_path / "reg")
    assert cli.main(["report", "--registers", str(tmp_path / "reg"), "--out", str(tmp_path / "o")]) == 0
    m = manifest(tmp_path / "o", "report")
    assert m["status"] == "ok" and m["n_warnings"] >= 1


def test_config_file_and_threshold_override(tmp_path, small_world):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[analysis]\nranges = [["early", 1, 4], ["late", 5, 12]]\n')
    out = tmp_path / "o"
    args = ["report", "--registers", str(small_world), "--out", str(out), "--config", str(cfg),
            "--small-threshold-kw", "100000000"]
    assert cli.main(args) == 0
    assert [r["label"] for r in read_csv(out / "programme_aggregates.csv")] == ["early", "late"]
    assert {r["small_dev"] for r in read_csv(out / "outcomes.csv")} == {"1"}
    m = manifest(out, "report")
    assert m["config"] == "run.toml" and m["config_digest"].startswith("sha256:") and "config/run.toml" in m["inputs"]


def test_bad_config_is_an_error(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[nonsense]\nx = 1\n")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert manifest(tmp_path / "o", "synth")["status"] == "error"


# -- validate ---------------------------------------------------------------------------


def _uniform_fixture(tmp_path):
    plans = [BidPlan(p, [UnitPlan(1500.0)], paid=8.49) for p in (7.6, 8.0, 8.3, 8.49)]
    reg = tmp_path / "reg"
    write_registers(build_registers({2: plans}, rules={2: PricingRule.UNIFORM_PRICE}), reg)
    assert cli.main(["link", "--registers", str(reg), "--out", str(tmp_path / "o")]) == 0
    return tmp_path / "o"


def test_validate_uniform_price_gap_zero(tmp_path):
    out = _uniform_fixture(tmp_path)
    pub = tmp_path / "published.csv"
    write_csv(pub, ("auction_index", "weighted_avg_ct_kwh"), [(2, "8.49")])
    assert cli.main(["validate", "--published", str(pub), "--out", str(out)]) == 0
    (row,) = read_csv(out / "validation.csv")
    assert float(row["abs_gap"]) == 0.0 and row["flagged"] == "0"


def test_validate_one_sided_auction_flagged_but_succeeds(tmp_path):
    out = _uniform_fixture(tmp_path)
    pub = tmp_path / "published.csv"
    write_csv(pub, ("auction_index", "weighted_avg_ct_kwh"), [(2, "8.49"), (3, "6.9")])
    assert cli.main(["validate", "--published", str(pub), "--out", str(out)]) == 0
    rows = {r["auction"]: r for r in read_csv(out / "validation.csv")}
    assert rows["3"]["flagged"] == "1" and rows["3"]["note"]
    assert manifest(out, "validate")["n_warnings"] == 1


@pytest.fixture(scope="module")
def complete_world(tmp_path_factory):
    """All projects built and paid with positive premia, so every awarded kW has a value."""
    d = tmp_path_factory.mktemp("complete")
    cfg = WorldConfig(seed=8, p_cancel=0.0, mv_start=1.0, mv_end=1.5, mv_noise_sd=0.0, mv_seasonal_amp=0.0)
    world = generate_world(cfg)
    write_world(world, d / "reg")
    assert cli.main(["link", "--registers", str(d / "reg"), "--out", str(d / "link")]) == 0
    return world, d


def _truth_averages(world):
    acc = {}
    for t in world.truth.projects:
        num, den = acc.get(t.auction_index, (0.0, 0.0))
        acc[t.auction_index] = (num + t.capacity_kw * t.bid, den + t.capacity_kw)
    return {a: num / den for a, (num, den) in acc.items()}


def test_validate_ground_truth_published_gaps_vanish(complete_world, tmp_path):
    world, d = complete_world
    pub = tmp_path / "truth.csv"
    write_csv(pub, ("auction_index", "weighted_avg_ct_kwh"), sorted((a, repr(v)) for a, v in _truth_averages(world).items()))
    out = tmp_path / "v"
    assert cli.main(["validate", "--published", str(pub), "--linkage", str(d / "link"), "--out", str(out)]) == 0
    rows = read_csv(out / "validation.csv")
    assert len(rows) == 12 and all(float(r["abs_gap"]) <= 1e-9 for r in rows)


def test_validate_perturbed_published_flags_only_those_rows(complete_world, tmp_path):
    world, d = complete_world
    avgs = _truth_averages(world)
    bumped = {3: 0.25, 7: -0.5, 11: 0.11}
    pub = tmp_path / "pub.csv"
    write_csv(pub, ("auction_index", "weighted_avg_ct_kwh"),
              sorted((a, repr(v + bumped.get(a, 0.0))) for a, v in avgs.items()))
    out = tmp_path / "v"
    assert cli.main(["validate", "--published", str(pub), "--linkage", str(d / "link"), "--out", str(out)]) == 0
    flagged = {int(r["auction"]) for r in read_csv(out / "validation.csv") if r["flagged"] == "1"}
    assert flagged == set(bumped)
    assert cli.main(["validate", "--published", str(pub), "--linkage", str(d / "link"), "--out", str(out),
                     "--bound", "0.2"]) == 0
    flagged = {int(r["auction"]) for r in read_csv(out / "validation.csv") if r["flagged"] == "1"}
    assert flagged == {3, 7}


def test_validate_missing_published_file_fails(tmp_path):
    out = _uniform_fixture(tmp_path)
    assert cli.main(["validate", "--published", str(tmp_path / "nope.csv"), "--out", str(out)]) == 1


# -- idempotence --------------------------------------------------------------------------


def test_report_rerun_is_byte_identical(small_world, tmp_path):
    for d in ("a", "b"):
        assert cli.main(["report", "--registers", str(small_world), "--out", str(tmp_path / d)]) == 0
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
    assert a == b
    m = manifest(tmp_path / "a", "report")
    assert m["outputs"]["summary.json"] == manifest(tmp_path / "b", "report")["outputs"]["summary.json"]


def test_shipped_example_config_parses():
    from pvauction.config import load_config

    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "example.toml")
    assert cfg.synth.seed == 42 and cfg.tau == 0.005 and cfg.marginal == "full"
    assert [r[0] for r in cfg.analysis.ranges] == ["AU1-AU8", "AU9-AU12", "AU1-AU12"]
