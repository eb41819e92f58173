"""Fixed-stride ablation for the KiTE extender on one scenario."""

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

from kiteplan.bench.experiments import skip_ablation
from kiteplan.bench.runner import render_ablation
from kiteplan.bench.scenario import generate_scenario
from kiteplan.dynamics import MODELS, SystemId
from kiteplan.edge_bundle import PAPER_SIZES, generate_bundle


@dataclass
class AblationJob:
    template: str = "Swap2D"
    system: str = "UC"
    n_agents: int = 4
    skips: tuple = (5, 10, 25)
    planners: tuple = ("cRRT", "pRRT", "KCBS")
    trials: int = 10
    budget: float = 60.0
    out: Path = Path("results/skip_ablation.json")


def main(job: AblationJob) -> None:
    sid = SystemId(job.system)
    bundle = generate_bundle(MODELS[sid], PAPER_SIZES[sid], seed=0)
    sc = generate_scenario(job.template, sid, job.n_agents, seed=0)
    table, _ = skip_ablation(sc, job.planners, job.skips, range(job.trials), bundle, budget=job.budget)
    job.out.parent.mkdir(parents=True, exist_ok=True)
    job.out.write_text(json.dumps(table, indent=1))
    print(render_ablation(table))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template", default="Swap2D")
    ap.add_argument("--system", default="UC")
    ap.add_argument("-N", type=int, default=4)
    ap.add_argument("--skips", type=int, nargs="+", default=[5, 10, 25])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--budget", type=float, default=60.0)
    ap.add_argument("--out", type=Path, default=AblationJob.out)
    a = ap.parse_args()
    main(AblationJob(a.template, a.system, a.N, tuple(a.skips), trials=a.trials, budget=a.budget,
                     out=a.out))
