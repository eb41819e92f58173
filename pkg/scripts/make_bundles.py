"""Generate the three default-size edge bundles into a directory."""

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from kiteplan.dynamics import MODELS, SystemId
from kiteplan.edge_bundle import PAPER_SIZES, generate_bundle, save, verify_bundle


@dataclass
class BundleJob:
    out_dir: Path = Path("bundles")
    seed: int = 0
    verify: bool = True


def main(job: BundleJob) -> None:
    job.out_dir.mkdir(parents=True, exist_ok=True)
    for sid in SystemId:
        t0 = time.perf_counter()
        b = generate_bundle(MODELS[sid], PAPER_SIZES[sid], seed=job.seed)
        dt = time.perf_counter() - t0
        path = job.out_dir / f"{sid.value.lower()}.bin"
        save(b, path)
        bad = verify_bundle(b).size if job.verify else "skipped"
        print(f"{sid.value}: {len(b)} edges in {dt:.1f}s -> {path} (bad edges: {bad})")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=BundleJob.out_dir)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-verify", action="store_true")
    a = ap.parse_args()
    main(BundleJob(a.out_dir, a.seed, not a.no_verify))
