"""Scaled Base vs KiTE comparison on a few template rows; prints a markdown table."""

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path

from kiteplan.bench.experiments import compare_variants
from kiteplan.bench.runner import render_table
from kiteplan.bench.scenario import generate_scenario
from kiteplan.dynamics import MODELS, SystemId
from kiteplan.edge_bundle import PAPER_SIZES, KeyIndex, generate_bundle


@dataclass
class Row:
    template: str
    system: str
    n_agents: int
    planners: tuple = ("cRRT", "pRRT", "KCBS")


@dataclass
class TableJob:
    rows: list = field(default_factory=lambda: [
        Row("SmallCluttered", "SOC", 4, ("KCBS",)),
        Row("Swap2D", "UC", 4),
        Row("Swap3D", "DI", 20, ("pRRT", "KCBS")),
    ])
    trials: int = 10
    budget: float = 60.0
    scenario_seed: int = 0
    bundle_seed: int = 0
    out: Path = Path("results/table_subset.json")


def main(job: TableJob) -> None:
    bundles, indexes, records = {}, {}, []
    for row in job.rows:
        sid = SystemId(row.system)
        if sid not in bundles:
            bundles[sid] = generate_bundle(MODELS[sid], PAPER_SIZES[sid], seed=job.bundle_seed)
            indexes[sid] = KeyIndex(bundles[sid])
        sc = generate_scenario(row.template, sid, row.n_agents, seed=job.scenario_seed)
        for planner in row.planners:
            pair = compare_variants(sc, planner, range(job.trials), bundles[sid], indexes[sid],
                                    budget=job.budget)
            records += [pair["Base"], pair["KiTE"]]
            print(render_table(records[-2:]), flush=True)
    job.out.parent.mkdir(parents=True, exist_ok=True)
    job.out.write_text(json.dumps([r.to_dict() for r in records], indent=1))
    print(render_table(records))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--budget", type=float, default=60.0)
    ap.add_argument("--out", type=Path, default=TableJob.out)
    a = ap.parse_args()
    main(TableJob(trials=a.trials, budget=a.budget, out=a.out))
