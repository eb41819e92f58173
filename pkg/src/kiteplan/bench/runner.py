"""Seeded multi-trial campaigns, metric aggregation and table rendering."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..edge_bundle import EdgeBundle, KeyIndex
from ..mrmp import PLANNERS, solve
from ..planner import PlannerConfig
from .scenario import Scenario
from .validate import validate_solution

RESULTS_FORMAT = "kiteplan.results"
RESULTS_VERSION = 1
WORKERS_ENV = "KITEPLAN_WORKERS"
VARIANTS = {"Base": "Rand", "KiTE": "KiTE"}


@dataclass
class RunConfig:
    planner: str = "KCBS"
    variant: str = "KiTE"
    seeds: list = field(default_factory=lambda: list(range(10)))
    budget: float = 300.0
    pruning: bool = False
    K: int = 10
    epsilon: float = 0.01
    skip: Optional[int] = None
    delta: Optional[float] = None
    goal_bias: float = 0.05
    max_iterations: int = 50_000
    t_max: float = 3.0
    validate: bool = True

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"planner must be one of {sorted(PLANNERS)}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
        if self.pruning and self.planner != "KCBS":
            raise ValueError("pruning applies to KCBS only")
        self.seeds = [int(s) for s in self.seeds]

    @property
    def trials(self) -> int:
        return len(self.seeds)

    @property
    def label(self) -> str:
        return f"{self.planner}+{self.variant}"

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(extension=VARIANTS[self.variant], K=self.K, epsilon=self.epsilon,
                             skip=self.skip, delta=self.delta, goal_bias=self.goal_bias,
                             max_iterations=self.max_iterations, budget=self.budget,
                             t_max=self.t_max)


@dataclass
class TrialRecord:
    seed: int
    success: bool
    status: str
    ct: float
    pt: Optional[float]
    iterations: int
    expansions: int = 0
    conflicts: int = 0
    failed_agent: Optional[int] = None
    valid: Optional[bool] = None


def mean_stderr(values: Sequence[float]):
    """Mean and standard error (sample std / sqrt(n)); ``None`` for an empty sample."""
    if len(values) == 0:
        return None, None
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


@dataclass
class ResultsRecord:
    scenario: str
    config: dict
    trials: list

    @property
    def n_success(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def success_rate(self) -> float:
        return 100.0 * self.n_success / len(self.trials) if self.trials else 0.0

    def aggregate(self) -> dict:
        ok = [t for t in self.trials if t.success]
        ct_m, ct_se = mean_stderr([t.ct for t in ok])
        pt_m, pt_se = mean_stderr([t.pt for t in ok])
        return {"trials": len(self.trials), "successes": len(ok), "sr": self.success_rate,
                "ct_mean": ct_m, "ct_stderr": ct_se, "pt_mean": pt_m, "pt_stderr": pt_se,
                "mean_conflicts": (float(np.mean([t.conflicts for t in ok])) if ok else None)}

    def to_dict(self) -> dict:
        return {"format": RESULTS_FORMAT, "version": RESULTS_VERSION, "scenario": self.scenario,
                "config": self.config, "aggregate": self.aggregate(),
                "trials": [asdict(t) for t in self.trials]}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultsRecord":
        if d.get("format") != RESULTS_FORMAT:
            raise ValueError("not a results file")
        if d.get("version") != RESULTS_VERSION:
            raise ValueError(f"unsupported results version {d.get('version')}")
        return cls(d["scenario"], d["config"], [TrialRecord(**t) for t in d["trials"]])


def save_results(rec: ResultsRecord, path) -> None:
    Path(path).write_text(json.dumps(rec.to_dict(), indent=1))


def load_results(path) -> ResultsRecord:
    return ResultsRecord.from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------ running


def run_trial(scenario: Scenario, rc: RunConfig, seed: int, bundle: Optional[EdgeBundle] = None,
              index: Optional[KeyIndex] = None, instance=None, solution_sink=None) -> TrialRecord:
    """One seeded solve. CT is the planner's own wall time; loading and checking are excluded."""
    if (bundle is not None) != (rc.variant == "KiTE"):
        raise ValueError("a bundle is required for KiTE and must be absent for Base")
    instance = instance if instance is not None else scenario.to_instance()
    res = solve(rc.planner, instance, bundle, rc.planner_config(), np.random.default_rng(seed),
                index, pruning=rc.pruning)
    valid = None
    if res.success and rc.validate:
        valid = validate_solution(instance, res.solution).ok
    if res.success and solution_sink is not None:
        solution_sink(seed, res.solution)
    return TrialRecord(seed, res.success, res.status, res.elapsed, res.path_time, res.iterations,
                       res.expansions, res.conflicts, res.failed_agent, valid)


_WORKER = {}


def _init_worker(scenario_dict, rc, bundle):
    sc = Scenario.from_dict(scenario_dict)
    _WORKER.update(scenario=sc, instance=sc.to_instance(), rc=rc, bundle=bundle,
                   index=KeyIndex(bundle) if bundle is not None else None)


def _worker_trial(seed):
    w = _WORKER
    return run_trial(w["scenario"], w["rc"], seed, w["bundle"], w["index"], w["instance"])


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


def run_campaign(scenario: Scenario, rc: RunConfig, bundle: Optional[EdgeBundle] = None,
                 index: Optional[KeyIndex] = None, workers: Optional[int] = None,
                 jsonl_path=None, progress=None) -> ResultsRecord:
    """All trials of ``rc`` on ``scenario``; records come back in seed-list order.

    With more than one worker, trials run in separate processes, each holding
    its own planner, index and generator.
    """
    if (bundle is not None) != (rc.variant == "KiTE"):
        raise ValueError("a bundle is required for KiTE and must be absent for Base")
    workers = worker_count() if workers is None else workers
    records = []
    if workers <= 1 or rc.trials <= 1:
        if index is None and bundle is not None:
            index = KeyIndex(bundle)
        instance = scenario.to_instance()
        for s in rc.seeds:
            records.append(run_trial(scenario, rc, s, bundle, index, instance))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(scenario.to_dict(), rc, bundle)) as pool:
            for rec in pool.map(_worker_trial, rc.seeds):
                records.append(rec)
                if progress:
                    progress(rec)
    if jsonl_path is not None:
        with open(jsonl_path, "a") as f:
            for r in records:
                f.write(json.dumps({"scenario": scenario.name, "run": rc.label, **asdict(r)}) + "\n")
    return ResultsRecord(scenario.name, asdict(rc), records)


# ---------------------------------------------------------------- rendering


def fmt_num(x: Optional[float]) -> str:
    """Three significant digits, without scientific notation for the usual ranges."""
    if x is None:
        return "-"
    if x == 0:
        return "0.0"
    mag = math.floor(math.log10(abs(x)))
    decimals = max(0, 2 - mag)
    return f"{x:.{decimals}f}"


def fmt_pm(mean: Optional[float], se: Optional[float]) -> str:
    if mean is None:
        return "-"
    return f"{fmt_num(mean)} ± {fmt_num(se)}"


def render_table(records: Sequence[ResultsRecord]) -> str:
    """Markdown table: one row per (scenario, variant), SR / CT / PT column triple per planner.

    The ± figures are standard errors over successful trials.
    """
    planners = [p for p in PLANNERS if any(r.config["planner"] == p for r in records)]
    rows = {}
    for r in records:
        key = (r.scenario, r.config["variant"])
        rows.setdefault(key, {})[r.config["planner"]] = r.aggregate()
    head = ["Domain", "Variant"]
    for p in planners:
        head += [f"{p} SR (%)", f"{p} CT (s, ±SE)", f"{p} PT (s, ±SE)"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for (scen, var), cols in rows.items():
        cells = [scen, var]
        for p in planners:
            a = cols.get(p)
            if a is None:
                cells += ["", "", ""]
            else:
                cells += [f"{a['sr']:.0f}", fmt_pm(a["ct_mean"], a["ct_stderr"]),
                          fmt_pm(a["pt_mean"], a["pt_stderr"])]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def ablation_table(results: dict, parameter: str = "skip factor p") -> dict:
    """Common-success aggregation across parameter settings, per planner.

    ``results`` maps ``setting -> {planner_label: ResultsRecord}``. For each
    planner, only seeds that succeeded under every setting count; "rounds"
    is their number.
    """
    settings = list(results)
    planners = sorted({p for per in results.values() for p in per})
    common = {}
    for p in planners:
        seeds = None
        for s in settings:
            rec = results[s].get(p)
            ok = {t.seed for t in rec.trials if t.success} if rec else set()
            seeds = ok if seeds is None else seeds & ok
        common[p] = sorted(seeds or [])
    rows = []
    for s in settings:
        row = {"setting": s}
        for p in planners:
            rec = results[s].get(p)
            keep = [t for t in rec.trials if t.seed in set(common[p])] if rec else []
            ct_m, ct_se = mean_stderr([t.ct for t in keep])
            pt_m, pt_se = mean_stderr([t.pt for t in keep])
            row[p] = {"rounds": len(common[p]), "ct_mean": ct_m, "ct_stderr": ct_se,
                      "pt_mean": pt_m, "pt_stderr": pt_se}
        rows.append(row)
    return {"format": "kiteplan.ablation", "version": 1, "parameter": parameter,
            "planners": planners, "rows": rows}


def render_ablation(table: dict) -> str:
    planners = table["planners"]
    head = [table["parameter"]]
    for p in planners:
        head += [f"{p} Rounds", f"{p} CT (s, ±SE)", f"{p} PT (s, ±SE)"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in table["rows"]:
        cells = [str(row["setting"])]
        for p in planners:
            c = row[p]
            cells += [str(c["rounds"]), fmt_pm(c["ct_mean"], c["ct_stderr"]),
                      fmt_pm(c["pt_mean"], c["pt_stderr"])]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)
