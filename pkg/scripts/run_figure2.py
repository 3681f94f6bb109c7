#!/usr/bin/env python3
"""Encoder training-strategy ablation: load+fix (MAIL) vs load+train vs
random+train. The random+fix combination is excluded by design.

    python3 scripts/run_figure2.py --workdir runs/figure2 --seeds 0 1 2
"""

import argparse
from pathlib import Path

from _shared import ensure_bc, ensure_demos, print_results_table, run_preset

STRATEGIES = ["MAIL", "MAIL_LOAD_TRAIN", "MAIL_RANDOM_TRAIN"]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/figure2")
    parser.add_argument("--pairs", type=int, default=100_000)
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--progress", action="store_true")
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for preset in STRATEGIES:
        summaries = []
        for seed in args.seeds:
            demos = ensure_demos(workdir, args.pairs, seed)
            bc_dir = ensure_bc(workdir, demos, seed)
            summary = run_preset(workdir, preset, seed, demos, bc_dir, None,
                                 args.steps, args.progress)
            print(f"{preset} seed {seed}: final {summary['final_score']:.2f}")
            summaries.append(summary)
        rows.append((preset, summaries))
    print()
    print_results_table(rows)


if __name__ == "__main__":
    main()
