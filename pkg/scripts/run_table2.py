#!/usr/bin/env python3
"""Compare the five reward penalization schemes under the shared frozen
encoder (the reward-scheme comparison table).

    python3 scripts/run_table2.py --workdir runs/table2 --seeds 0
"""

import argparse
from pathlib import Path

from _shared import ensure_bc, ensure_demos, print_results_table, run_preset
from mailab.harness.presets import TABLE2_PRESETS


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="runs/table2")
    parser.add_argument("--pairs", type=int, default=100_000)
    parser.add_argument("--steps", type=int, default=200_000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0])
    parser.add_argument("--progress", action="store_true")
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for preset in TABLE2_PRESETS:
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
