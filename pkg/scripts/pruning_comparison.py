"""KCBS with and without tree pruning on Swap SOC scenarios of growing size."""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

from kiteplan.bench.experiments import compare_pruning
from kiteplan.bench.runner import render_table
from kiteplan.bench.scenario import generate_scenario
from kiteplan.dynamics import MODELS, SystemId
from kiteplan.edge_bundle import PAPER_SIZES, generate_bundle


@dataclass
class PruningJob:
    sizes: tuple = (3, 5, 7)
    trials: int = 10
    budget: float = 60.0
    variant: str = "KiTE"
    out: Path = Path("results/pruning.json")


def main(job: PruningJob) -> None:
    bundle = None
    if job.variant == "KiTE":
        bundle = generate_bundle(MODELS[SystemId.SOC], PAPER_SIZES[SystemId.SOC], seed=0)
    dump = {}
    for n in job.sizes:
        sc = generate_scenario("Swap2D", "SOC", n, seed=0)
        out = compare_pruning(sc, range(job.trials), bundle, budget=job.budget)
        print(f"N={n}\n" + render_table([out["off"], out["on"]]), flush=True)
        dump[n] = {k: r.to_dict() for k, r in out.items()}
    job.out.parent.mkdir(parents=True, exist_ok=True)
    job.out.write_text(json.dumps(dump, indent=1))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 5, 7])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--budget", type=float, default=60.0)
    ap.add_argument("--variant", choices=["Base", "KiTE"], default="KiTE")
    ap.add_argument("--out", type=Path, default=PruningJob.out)
    a = ap.parse_args()
    main(PruningJob(tuple(a.sizes), a.trials, a.budget, a.variant, a.out))
