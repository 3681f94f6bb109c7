"""Behavior-cloning pre-training of the global encoder.

Supervised cross-entropy on expert state-action pairs, split 90/10 into
train/holdout by episode. The trained encoder is what later runs load
(and usually freeze); the classifier head doubles as a sanity policy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc
from ..demogen import DemoDataset
from ..errors import ConfigError
from ..models import Actor, Encoder, ModelDims
from .config import TrainConfig, rng_stream


@dataclass
class BCReport:
    holdout_accuracy: float
    epochs_run: int
    train_losses: list[float] = field(default_factory=list)
    holdout_curve: list[float] = field(default_factory=list)
    wall_clock_sec: float = 0.0


def _episode_record_indices(demos: DemoDataset, episodes: np.ndarray) -> np.ndarray:
    chunks = []
    for e in episodes:
        start, end = demos.episode_bounds(int(e))
        chunks.append(np.arange(start, end))
    return np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def _render_batch(demos: DemoDataset, indices: np.ndarray) -> np.ndarray:
    return np.stack([demos.observation(int(i)) for i in indices])


def _accuracy(encoder: Encoder, actor: Actor, demos: DemoDataset,
              indices: np.ndarray, batch: int = 512) -> float:
    hits = 0
    actions = demos.records[indices, 7].astype(np.int64)
    with dc.no_grad():
        for start in range(0, len(indices), batch):
            chunk = indices[start : start + batch]
            obs = _render_batch(demos, chunk)
            logits = actor.logits(encoder.forward(obs)).data
            hits += int((logits.argmax(axis=-1) == actions[start : start + batch]).sum())
    return hits / len(indices)


def bc_pretrain(
    demos: DemoDataset,
    cfg: TrainConfig,
    dims: ModelDims | None = None,
    progress: bool = False,
) -> tuple[Encoder, Actor, BCReport]:
    """Train encoder + action classifier on expert pairs.

    Runs at most cfg.bc_epochs epochs, stopping early once the holdout
    accuracy reaches cfg.bc_target_acc.
    """
    if demos.count == 0:
        raise ConfigError("behavior cloning needs a non-empty demo dataset")
    t0 = time.monotonic()
    dims = dims or ModelDims()
    init_rng = rng_stream(cfg.seed, "bc-init")
    encoder = Encoder(init_rng, dims)
    actor = Actor(init_rng, dims)

    split_rng = rng_stream(cfg.seed, "bc-split")
    episodes = split_rng.permutation(demos.n_episodes)
    n_holdout = max(1, int(round(demos.n_episodes * cfg.bc_holdout_frac)))
    if demos.n_episodes > 1:
        holdout_eps, train_eps = episodes[:n_holdout], episodes[n_holdout:]
    else:
        holdout_eps = train_eps = episodes  # degenerate single-episode data
    train_idx = _episode_record_indices(demos, train_eps)
    holdout_idx = _episode_record_indices(demos, holdout_eps)
    actions = demos.records[:, 7].astype(np.int64)

    opt = dc.Adam([encoder.params, actor.params], lr=cfg.bc_lr)
    batch_rng = rng_stream(cfg.seed, "bc-batches")
    report = BCReport(holdout_accuracy=0.0, epochs_run=0)
    for epoch in range(cfg.bc_epochs):
        order = batch_rng.permutation(train_idx)
        losses = []
        for start in range(0, len(order), cfg.bc_batch):
            chunk = order[start : start + cfg.bc_batch]
            obs = _render_batch(demos, chunk)
            loss = dc.cross_entropy(
                actor.logits(encoder.forward(obs)), actions[chunk]
            )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        acc = _accuracy(encoder, actor, demos, holdout_idx)
        report.train_losses.append(float(np.mean(losses)))
        report.holdout_curve.append(acc)
        report.holdout_accuracy = acc
        report.epochs_run = epoch + 1
        if progress:
            print(f"bc epoch {epoch + 1}: loss {report.train_losses[-1]:.4f} "
                  f"holdout acc {acc:.4f}", flush=True)
        if acc >= cfg.bc_target_acc:
            break
    report.wall_clock_sec = time.monotonic() - t0
    return encoder, actor, report
