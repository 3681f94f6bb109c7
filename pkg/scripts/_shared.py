"""Shared plumbing for the experiment scripts: artifact caching per seed."""

from __future__ import annotations

import json
from pathlib import Path

from mailab.harness import pipelines
from mailab.harness.config import ExperimentConfig
from mailab.harness.presets import preset_config
from mailab.trainers import TrainConfig


def ensure_demos(workdir: Path, pairs: int, seed: int) -> Path:
    out = workdir / f"demos_s{seed}"
    path = out / pipelines.DEMO_FILENAME
    if not path.is_file():
        pipelines.run_gen_demos(pairs, seed, out)
    return path


def ensure_bc(workdir: Path, demos: Path, seed: int) -> Path:
    out = workdir / f"bc_s{seed}"
    if not (out / "networks.json").is_file():
        pipelines.run_train_bc(demos, seed, out)
    return out


def ensure_posterior(workdir: Path, demos: Path, bc_dir: Path, seed: int) -> Path:
    out = workdir / f"posterior_s{seed}"
    if not (out / "networks.json").is_file():
        pipelines.run_train_posterior(demos, bc_dir, seed, out)
    return out


def run_preset(workdir: Path, preset: str, seed: int, demos: Path,
               bc_dir: Path | None, posterior_dir: Path | None,
               steps: int | None, progress: bool = False) -> dict:
    """Train one preset/seed pair, reusing a cached summary if present."""
    tag = preset.replace("+", "_").replace("-", "_")
    out = workdir / f"run_{tag}_s{seed}"
    summary_path = out / "summary.json"
    if summary_path.is_file():
        return json.loads(summary_path.read_text())
    train_cfg = preset_config(preset, seed=seed)
    if steps is not None:
        train_cfg.total_steps = steps
    exp = ExperimentConfig(
        preset=preset,
        seed=seed,
        demos=str(demos),
        bc_checkpoint=str(bc_dir) if bc_dir else None,
        posterior_checkpoint=str(posterior_dir) if posterior_dir else None,
        out_dir=str(out),
        train=train_cfg,
    )
    return pipelines.run_train(exp, progress=progress)


def fmt_meets(step) -> str:
    if step is None:
        return "-"
    return f"{step / 1000:.0f}K"


def print_results_table(rows: list[tuple[str, list[dict]]]) -> None:
    """rows: (model name, per-seed summaries)."""
    import numpy as np

    print(f"{'Model':18s} {'Best':>8s} {'Score':>18s} {'Meets -10':>10s} "
          f"{'After meets -10':>18s}")
    for name, summaries in rows:
        best = max(s["best_score"] for s in summaries)
        finals = [s["final_score"] for s in summaries]
        score = f"{np.mean(finals):.2f}±{np.std(finals):.2f}"
        meets = [s["meets_threshold_step"] for s in summaries]
        met = [m for m in meets if m is not None]
        meets_txt = fmt_meets(min(met)) if len(met) == len(meets) and met else "-"
        afters = [s["after_meets"] for s in summaries if s["after_meets"]]
        after_txt = (
            f"{np.mean([a['mean'] for a in afters]):.2f}"
            f"±{np.mean([a['std'] for a in afters]):.2f}"
            if afters
            else "-"
        )
        print(f"{name:18s} {best:8.3f} {score:>18s} {meets_txt:>10s} {after_txt:>18s}")
