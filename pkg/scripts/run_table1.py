#!/usr/bin/env python3
"""Run every main-table preset over several seeds and print the comparison.

Artifacts (demos, phase-1/2 checkpoints, per-run reports) are cached under
the work directory, so re-running only fills in what is missing.

    python3 scripts/run_table1.py --workdir runs/table1 --seeds 0 1 2
"""

import argparse
from pathlib import Path

from _shared import (
    ensure_bc,
    ensure_demos,
    ensure_posterior,
    print_results_table,
    run_preset,
)
from mailab.harness.presets import (
    TABLE1_PRESETS,
    preset_needs_bc,
    preset_needs_posterior,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/table1")
    parser.add_argument("--pairs", type=int, default=100_000)
    parser.add_argument("--posterior-pairs", type=int, default=10_000)
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--presets", nargs="+", default=list(TABLE1_PRESETS))
    parser.add_argument("--progress", action="store_true")
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for preset in args.presets:
        summaries = []
        for seed in args.seeds:
            demos = ensure_demos(workdir, args.pairs, seed)
            bc_dir = ensure_bc(workdir, demos, seed) if preset_needs_bc(preset) else None
            posterior_dir = None
            if preset_needs_posterior(preset):
                post_demos = ensure_demos(workdir, args.posterior_pairs, seed + 1000)
                posterior_dir = ensure_posterior(workdir, post_demos, bc_dir, seed)
            summary = run_preset(workdir, preset, seed, demos, bc_dir,
                                 posterior_dir, args.steps, args.progress)
            print(f"{preset} seed {seed}: final {summary['final_score']:.2f} "
                  f"meets {summary['meets_threshold_step']}")
            summaries.append(summary)
        rows.append((preset, summaries))
    print()
    print_results_table(rows)


if __name__ == "__main__":
    main()
