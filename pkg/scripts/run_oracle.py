"""Generate worlds over a range of seeds and check the pipeline against ground truth.

    python3 scripts/run_oracle.py --seeds 0-19
"""

from __future__ import annotations

import argparse
import time

from pvauction.clearing import observed_outcomes
from pvauction.linkage import run_linkage
from pvauction.metrics import all_auction_metrics, project_outcomes
from pvauction.synth import WorldConfig, generate_world, oracle_diff


def seed_range(text: str) -> range:
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0-9", help="inclusive range, e.g. 0-19")
    ap.add_argument("--n-auctions", type=int, default=12)
    args = ap.parse_args()
    failures = 0
    for seed in seed_range(args.seeds):
        t0 = time.perf_counter()
        world = generate_world(WorldConfig(seed=seed, n_auctions=args.n_auctions))
        regs = world.registers()
        link = run_linkage(regs)
        awards = observed_outcomes(regs.results)
        outs = project_outcomes(link.projects, link.developers, awards, regs.results.specs, link.estimates)
        metrics = all_auction_metrics(outs, awards, regs.pv_index, regs.results.specs)
        report = oracle_diff(world.truth, link, outs, metrics)
        dt = time.perf_counter() - t0
        failures += not report.passed
        print(f"seed {seed:>4}: projects={report.n_projects} exact={report.n_positive_exact}/{report.n_positive} "
              f"diffs={len(report.entries)} {dt:.2f}s")
        for e in report.entries[:5]:
            print(f"    {e.kind} {e.key} {e.field}: expected {e.expected!r}, got {e.observed!r}")
    print("all seeds pass" if not failures else f"{failures} seed(s) with diffs")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
