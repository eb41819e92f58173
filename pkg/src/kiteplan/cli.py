"""Command-line entry point: ``kiteplan <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import edge_bundle as eb
from .dynamics import SystemId, get_model
from .mrmp import PLANNERS, load_solution, save_solution
from .bench import runner
from .bench.plot import emit_plot
from .bench.scenario import TEMPLATES, generate_scenario, load_scenario, save_scenario
from .bench.validate import validate_solution

log = logging.getLogger("kiteplan")


def _systems():
    return [s.value for s in SystemId]


def _add_planner_knobs(p):
    p.add_argument("--planner", choices=sorted(PLANNERS), default="KCBS")
    p.add_argument("--variant", choices=sorted(runner.VARIANTS), default="KiTE")
    p.add_argument("--bundle", type=Path, help="edge bundle file (required for KiTE)")
    p.add_argument("--budget", type=float, default=300.0, help="wall-clock seconds per trial")
    p.add_argument("--pruning", action="store_true", help="reuse pruned low-level trees (KCBS)")
    p.add_argument("--K", type=int, default=10, help="rollouts per random extension")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--skip", type=int, default=None, help="fixed stride p (default ceil(|C|/10))")
    p.add_argument("--delta", type=float, default=None, help="key retrieval radius")
    p.add_argument("--goal-bias", type=float, default=0.05)
    p.add_argument("--max-iterations", type=int, default=50_000)
    p.add_argument("--t-max", type=float, default=3.0)


def _run_config(a, seeds) -> runner.RunConfig:
    return runner.RunConfig(planner=a.planner, variant=a.variant, seeds=seeds, budget=a.budget,
                            pruning=a.pruning, K=a.K, epsilon=a.epsilon, skip=a.skip,
                            delta=a.delta, goal_bias=a.goal_bias,
                            max_iterations=a.max_iterations, t_max=a.t_max)


def _load_bundle(a, system):
    if a.variant == "KiTE":
        if a.bundle is None:
            raise SystemExit("error: --bundle is required for the KiTE variant")
        return eb.load(a.bundle, expect_system=system)
    if a.bundle is not None:
        raise SystemExit("error: --bundle only applies to the KiTE variant")
    return None


# ------------------------------------------------------------------ commands


def cmd_bundle_generate(a):
    model = get_model(a.system)
    size = a.size or eb.PAPER_SIZES[model.system_id]
    t0 = time.perf_counter()
    b = eb.generate_bundle(model, size, t_max=a.t_max, seed=a.seed)
    eb.save(b, a.output)
    print(f"wrote {len(b)} {model.system_id.value} edges to {a.output} "
          f"in {time.perf_counter() - t0:.1f} s")


def cmd_bundle_info(a):
    b = eb.load(a.path)
    info = {"system": b.system_id.value, "edges": len(b), "dt": b.dt, "t_max": b.t_max,
            "seed": b.seed, "record_bytes": eb.record_size(b.model),
            "mean_duration": float(np.mean(b.steps) * b.dt)}
    if a.verify:
        bad = eb.verify_bundle(b)
        info["failed_edges"] = int(bad.size)
    print(json.dumps(info, indent=1))
    return 1 if info.get("failed_edges") else 0


def cmd_scenario_generate(a):
    sc = generate_scenario(a.template, a.system, a.n_agents, a.seed)
    save_scenario(sc, a.output)
    print(f"wrote {sc.name} ({sc.n_agents} agents, {len(sc.obstacles)} obstacles) to {a.output}")


def cmd_plan(a):
    sc = load_scenario(a.scenario)
    bundle = _load_bundle(a, sc.system)
    rc = _run_config(a, [a.seed])
    holder = {}
    rec = runner.run_trial(sc, rc, a.seed, bundle,
                           solution_sink=lambda s, sol: holder.setdefault("sol", sol))
    print(json.dumps(asdict(rec), indent=1))
    sol = holder.get("sol")
    if sol is not None:
        meta = {"scenario": sc.name, "seed": a.seed, "config": asdict(rc),
                "ct": rec.ct, "iterations": rec.iterations, "conflicts": rec.conflicts}
        if a.output:
            save_solution(sol, get_model(sc.system), a.output, meta)
        if a.plot:
            emit_plot(sc, sol, a.plot)
    elif a.plot:
        emit_plot(sc, None, a.plot)
    return 0 if rec.success else 2


def cmd_bench(a):
    sc = load_scenario(a.scenario)
    bundle = _load_bundle(a, sc.system)
    seeds = a.seeds if a.seeds else list(range(a.seed0, a.seed0 + a.trials))
    rc = _run_config(a, seeds)

    def progress(r):
        log.info("seed %d: %s ct=%.3fs pt=%s", r.seed, r.status, r.ct, r.pt)

    res = runner.run_campaign(sc, rc, bundle, workers=a.workers, jsonl_path=a.jsonl,
                              progress=progress)
    if a.output:
        runner.save_results(res, a.output)
    print(runner.render_table([res]))
    return 0


def cmd_validate(a):
    sc = load_scenario(a.scenario)
    rep = validate_solution(sc.to_instance(), load_solution(a.solution))
    print(rep.summary())
    return 0 if rep.ok else 1


def cmd_report(a):
    if a.ablation:
        for p in a.results:
            table = json.loads(Path(p).read_text())
            print(runner.render_ablation(table))
        return 0
    recs = [runner.load_results(p) for p in a.results]
    print(runner.render_table(recs))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kiteplan", description="Kinodynamic multi-robot planning "
                                 "with translation-invariant edge bundles")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bundle", help="edge bundle tools").add_subparsers(dest="bundle_cmd", required=True)
    g = b.add_parser("generate", help="sample a bundle and write it")
    g.add_argument("--system", choices=_systems(), required=True)
    g.add_argument("--size", type=int, default=None, help="edge count (default per system)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--t-max", type=float, default=3.0)
    g.add_argument("-o", "--output", type=Path, required=True)
    g.set_defaults(func=cmd_bundle_generate)
    i = b.add_parser("info", help="print a bundle header")
    i.add_argument("path", type=Path)
    i.add_argument("--verify", action="store_true", help="re-propagate every edge")
    i.set_defaults(func=cmd_bundle_info)

    s = sub.add_parser("scenario", help="scenario tools").add_subparsers(dest="scenario_cmd", required=True)
    sg = s.add_parser("generate", help="build a scenario from a template")
    sg.add_argument("--template", choices=TEMPLATES, required=True)
    sg.add_argument("--system", choices=_systems(), required=True)
    sg.add_argument("-N", "--n-agents", type=int, required=True)
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("-o", "--output", type=Path, required=True)
    sg.set_defaults(func=cmd_scenario_generate)

    p = sub.add_parser("plan", help="solve one scenario once")
    p.add_argument("--scenario", type=Path, required=True)
    _add_planner_knobs(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, help="solution JSON")
    p.add_argument("--plot", type=Path, help="SVG output")
    p.set_defaults(func=cmd_plan)

    c = sub.add_parser("bench", help="run a seeded campaign")
    c.add_argument("--scenario", type=Path, required=True)
    _add_planner_knobs(c)
    c.add_argument("--trials", type=int, default=10)
    c.add_argument("--seed0", type=int, default=0, help="first seed when --seeds is absent")
    c.add_argument("--seeds", type=int, nargs="*", default=None)
    c.add_argument("--workers", type=int, default=None,
                   help=f"parallel trials (default ${runner.WORKERS_ENV} or 1)")
    c.add_argument("--jsonl", type=Path, help="append one record per trial here")
    c.add_argument("-o", "--output", type=Path, help="aggregate results JSON")
    c.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="check a solution file")
    v.add_argument("--scenario", type=Path, required=True)
    v.add_argument("--solution", type=Path, required=True)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("report", help="render results tables")
    r.add_argument("results", type=Path, nargs="+")
    r.add_argument("--ablation", action="store_true", help="inputs are ablation tables")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return a.func(a) or 0


if __name__ == "__main__":
    sys.exit(main())
