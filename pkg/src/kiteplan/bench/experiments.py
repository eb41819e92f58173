"""Reusable campaign recipes: variant comparisons and parameter ablations."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

from ..edge_bundle import EdgeBundle, KeyIndex
from .runner import ResultsRecord, RunConfig, ablation_table, run_campaign
from .scenario import Scenario


def compare_variants(scenario: Scenario, planner: str, seeds: Sequence[int], bundle: EdgeBundle,
                     index: Optional[KeyIndex] = None, budget: float = 300.0,
                     workers: Optional[int] = None, **knobs) -> dict:
    """Base and KiTE campaigns of one planner over the same seed list."""
    index = index if index is not None else KeyIndex(bundle)
    out = {}
    for variant in ("Base", "KiTE"):
        rc = RunConfig(planner=planner, variant=variant, seeds=list(seeds), budget=budget, **knobs)
        out[variant] = run_campaign(scenario, rc, bundle if variant == "KiTE" else None,
                                    index if variant == "KiTE" else None, workers=workers)
    return out


def compare_pruning(scenario: Scenario, seeds: Sequence[int], bundle: Optional[EdgeBundle],
                    index: Optional[KeyIndex] = None, budget: float = 300.0,
                    workers: Optional[int] = None) -> dict:
    """KCBS with and without low-level tree reuse, same seeds."""
    variant = "KiTE" if bundle is not None else "Base"
    if bundle is not None and index is None:
        index = KeyIndex(bundle)
    out = {}
    for pruning in (False, True):
        rc = RunConfig(planner="KCBS", variant=variant, seeds=list(seeds), budget=budget,
                       pruning=pruning)
        out["on" if pruning else "off"] = run_campaign(scenario, rc, bundle, index, workers=workers)
    return out


def skip_ablation(scenario: Scenario, planners: Sequence[str], skips: Sequence[int],
                  seeds: Sequence[int], bundle: EdgeBundle, index: Optional[KeyIndex] = None,
                  budget: float = 300.0, workers: Optional[int] = None) -> tuple:
    """KiTE campaigns for each fixed stride p; returns (ablation table, raw records)."""
    index = index if index is not None else KeyIndex(bundle)
    raw = {}
    base = RunConfig(variant="KiTE", seeds=list(seeds), budget=budget)
    for p in skips:
        raw[p] = {}
        for planner in planners:
            rc = replace(base, planner=planner, skip=int(p))
            raw[p][f"{planner}+KiTE"] = run_campaign(scenario, rc, bundle, index, workers=workers)
    return ablation_table(raw, "Skip factor p"), raw


def ct_ratio(num: ResultsRecord, den: ResultsRecord) -> Optional[float]:
    a, b = num.aggregate()["ct_mean"], den.aggregate()["ct_mean"]
    if a is None or b is None or b == 0:
        return None
    return a / b
