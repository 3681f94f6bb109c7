"""Report files and analysis exports (learning curves, embeddings, codes)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from .. import navenv
from ..errors import ConfigError
from ..models import Actor, Encoder, FeatureCache, Posterior
from ..trainers import TrainReport
from ..trainers.config import rng_stream
from ..trainers.loop import _sample_categorical


def meets_threshold(
    curve: list[tuple[int, float]], threshold: float = -10.0, window: int = 10
) -> int | None:
    """First step whose rolling score mean (over up to `window` points)
    reaches the threshold; None if it never does."""
    if not curve:
        raise ConfigError("meets_threshold needs a non-empty curve")
    scores = [s for _, s in curve]
    for i, (step, _) in enumerate(curve):
        lo = max(0, i - window + 1)
        if float(np.mean(scores[lo : i + 1])) >= threshold:
            return step
    return None


def write_report_csv(path, report: TrainReport) -> None:
    lines = ["step,score_mean,score_std,disc_acc,reward_mean"]
    for p in report.curve:
        lines.append(
            f"{p.step},{p.score_mean!r},{p.score_std!r},"
            f"{p.disc_acc!r},{p.reward_mean!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def summarize(report: TrainReport, threshold: float | None = None,
              window: int | None = None) -> dict:
    """Summary statistics in the shape of the results table: best score,
    final score, first step meeting the threshold, and the post-threshold
    score statistics."""
    cfg = report.config
    threshold = cfg.score_threshold if threshold is None else threshold
    window = cfg.rolling_window if window is None else window
    curve = report.scores()
    meets = meets_threshold(curve, threshold, window)
    after = None
    if meets is not None:
        tail = [s for step, s in curve if step >= meets]
        after = {"mean": float(np.mean(tail)), "std": float(np.std(tail))}
    return {
        "preset_flags": {
            "global_encoder": cfg.global_encoder,
            "reward_scheme": cfg.reward_scheme,
            "vdb": cfg.vdb,
            "di": cfg.di,
        },
        "seed": cfg.seed,
        "total_steps": int(curve[-1][0]) if curve else 0,
        "best_score": report.best_score,
        "final_score": report.final_eval.mean if report.final_eval else None,
        "final_score_std": report.final_eval.std if report.final_eval else None,
        "final_success_rate": (
            report.final_eval.success_rate if report.final_eval else None
        ),
        "meets_threshold_step": meets,
        "threshold": threshold,
        "rolling_window": window,
        "after_meets": after,
        "wall_clock_sec": report.wall_clock_sec,
        "encoder_digest_start": report.encoder_digest_start,
        "encoder_digest_end": report.encoder_digest_end,
    }


def write_summary_json(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2) + "\n")


# ---------------------------------------------------------------------------
# analysis exports

def _state_id(agent, key, car, has_key) -> int:
    parts = (
        navenv.cell_index(agent),
        navenv.cell_index(key),
        navenv.cell_index(car),
        int(has_key),
    )
    return ((parts[0] * 49 + parts[1]) * 49 + parts[2]) * 2 + parts[3]


def sample_reachable_states(n_states: int, seed: int) -> list[tuple]:
    """Random reachable, non-terminal logical states with both key-flag
    values represented."""
    layout = navenv.default_layout()
    rng = rng_stream(seed, "embedding-states")
    states = []
    for i in range(n_states):
        has_key = bool(i % 2)  # guarantee both flag values
        key = layout.top_left_room[rng.integers(9)]
        car = layout.bottom_right_room[rng.integers(9)]
        banned = car if has_key else key
        choices = [c for c in layout.free_cells if c != banned]
        agent = choices[rng.integers(len(choices))]
        states.append((agent, key, car, has_key))
    return states


def export_embeddings(encoder: Encoder, n_states: int, seed: int, path) -> None:
    """CSV of encoder features over sampled states, for external projection
    tools: 5 metadata columns then the feature values."""
    states = sample_reachable_states(n_states, seed)
    obs = np.stack([navenv.render_cells(*s) for s in states])
    feats = encoder.features_np(obs)
    dim = feats.shape[1]
    header = "state_id,has_key,agent_cell,key_cell,car_cell," + ",".join(
        f"f{i:03d}" for i in range(dim)
    )
    lines = [header]
    for s, f in zip(states, feats):
        agent, key, car, has_key = s
        meta = (
            f"{_state_id(*s)},{int(has_key)},{navenv.cell_index(agent)},"
            f"{navenv.cell_index(key)},{navenv.cell_index(car)}"
        )
        lines.append(meta + "," + ",".join(repr(float(v)) for v in f))
    Path(path).write_text("\n".join(lines) + "\n")


def export_code_stats(
    actor: Actor,
    encoder: Encoder,
    posterior: Posterior,
    n_episodes: int,
    seed: int,
    path,
    summary_path=None,
) -> dict:
    """Per-timestep latent code ids over rollout episodes, plus per-code
    usage proportions."""
    if not actor.di or posterior is None:
        raise ConfigError("code statistics need a latent-code (DI) policy")
    cache = FeatureCache(encoder) if encoder.frozen else None
    reset_rng = rng_stream(seed, "codes-resets")
    action_rng = rng_stream(seed, "codes-actions")
    code_rng = rng_stream(seed, "codes-codes")
    k = actor.dims.n_codes
    rows = []
    counts = np.zeros(k, dtype=np.int64)
    for e in range(n_episodes):
        state = navenv.reset(int(reset_rng.integers(0, 2**62)))
        prev = None
        done = False
        t = 0
        while not done:
            logical = (state.agent, state.key, state.car, state.has_key)
            if cache is not None:
                feats = cache.features([logical])
            else:
                feats = encoder.features_np(
                    navenv.render_cells(*logical)[None]
                )
            prev_oh = np.zeros((1, k), dtype=np.float32)
            if prev is not None:
                prev_oh[0, prev] = 1.0
            with dc.no_grad():
                q = posterior.distribution(feats, prev_oh).data
                code = int(_sample_categorical(q, code_rng)[0])
                probs = actor.distribution(feats, dc.one_hot(np.array([code]), k)).data
            action = int(_sample_categorical(probs, action_rng)[0])
            rows.append((e, t, code))
            counts[code] += 1
            prev = code
            state, _r, done = navenv.step(state, action)
            t += 1
    lines = ["episode,timestep,code"] + [f"{e},{t},{c}" for e, t, c in rows]
    Path(path).write_text("\n".join(lines) + "\n")
    proportions = (counts / counts.sum()).tolist()
    summary = {
        "n_episodes": n_episodes,
        "n_steps": int(counts.sum()),
        "n_codes": k,
        "code_counts": counts.tolist(),
        "code_proportions": proportions,
    }
    if summary_path is not None:
        Path(summary_path).write_text(json.dumps(summary, indent=2) + "\n")
    return summary


# ---------------------------------------------------------------------------
# run manifests

def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, config: dict, seed: int,
                   inputs: dict[str, str | Path]) -> None:
    """Reproducibility record: command, config copy, seed, input hashes."""
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {
            str(name): {"path": str(p), "sha256": file_sha256(p)}
            for name, p in inputs.items()
            if p is not None and Path(p).is_file()
        },
    }
    Path(out_dir, "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
