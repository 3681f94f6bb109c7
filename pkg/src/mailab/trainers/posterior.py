"""Latent-code pre-training from demonstrations.

A per-step categorical code is sampled from the posterior (straight-through
Gumbel relaxation, temperature 1) and fed to a code-conditioned policy head;
the loss is action reconstruction plus a KL pull of the posterior toward the
uniform prior. The previous code enters as a detached one-hot context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc
from ..demogen import DemoDataset
from ..errors import UsageError
from ..models import Actor, Encoder, FeatureCache, ModelDims, Posterior
from .config import TrainConfig, rng_stream


@dataclass
class PosteriorReport:
    epoch_losses: list[float] = field(default_factory=list)
    epochs_run: int = 0


def _st_gumbel_sample(
    logits: dc.Tensor, rng: np.random.Generator
) -> tuple[dc.Tensor, np.ndarray]:
    """Straight-through sample: hard one-hot forward, soft gradients back."""
    u = np.clip(rng.random(logits.data.shape), 1e-12, 1.0 - 1e-12)
    gumbel = -np.log(-np.log(u)).astype(logits.data.dtype)
    soft = dc.softmax(dc.add(logits, gumbel))
    codes = soft.data.argmax(axis=-1)
    hard = dc.one_hot(codes, logits.data.shape[-1], dtype=logits.data.dtype)
    st = dc.add(dc.sub(soft, soft.detach()), hard)
    return st, codes


def posterior_pretrain(
    demos: DemoDataset,
    encoder: Encoder,
    cfg: TrainConfig,
    dims: ModelDims | None = None,
    progress: bool = False,
) -> tuple[Posterior, Actor, PosteriorReport]:
    """Train posterior + code-conditioned policy head on expert episodes."""
    if encoder is None:
        raise UsageError("posterior pre-training needs the trained encoder")
    if not encoder.frozen:
        raise UsageError("posterior pre-training expects a frozen encoder")
    dims = dims or ModelDims()
    k = dims.n_codes
    init_rng = rng_stream(cfg.seed, "posterior-init")
    posterior = Posterior(init_rng, dims)
    actor = Actor(init_rng, dims, di=True)
    cache = FeatureCache(encoder)
    opt = dc.Adam([posterior.params, actor.params], lr=cfg.bc_lr)

    sample_rng = rng_stream(cfg.seed, "posterior-codes")
    batch_rng = rng_stream(cfg.seed, "posterior-batches")
    log_k = float(np.log(k))
    report = PosteriorReport()

    episodes = [demos.episode_bounds(e) for e in range(demos.n_episodes)]
    for epoch in range(cfg.posterior_epochs):
        order = batch_rng.permutation(len(episodes))
        epoch_loss, epoch_steps = 0.0, 0
        for bstart in range(0, len(order), cfg.posterior_batch_episodes):
            batch_eps = [episodes[i] for i in order[bstart : bstart + cfg.posterior_batch_episodes]]
            max_len = max(end - start for start, end in batch_eps)
            prev = np.zeros((len(batch_eps), k), dtype=np.float32)  # episode start
            loss_acc = None
            n_rows = 0
            for t in range(max_len):
                rows = [
                    (j, start + t)
                    for j, (start, end) in enumerate(batch_eps)
                    if start + t < end
                ]
                idx = np.array([i for _, i in rows])
                sel = np.array([j for j, _ in rows])
                feats = cache.features([demos.logical_state(int(i)) for i in idx])
                actions = demos.records[idx, 7].astype(np.int64)
                logits = posterior.logits(feats, prev[sel])
                st_code, codes = _st_gumbel_sample(logits, sample_rng)
                pi_logp = dc.log_softmax(actor.logits(feats, st_code))
                ce = dc.neg(dc.tsum(dc.take_along_last(pi_logp, actions)))
                probs = dc.softmax(logits)
                logprobs = dc.log_softmax(logits)
                kl = dc.add(dc.tsum(dc.mul(probs, logprobs)), log_k * len(rows))
                step_loss = dc.add(ce, dc.mul(kl, cfg.posterior_kl_weight))
                loss_acc = step_loss if loss_acc is None else dc.add(loss_acc, step_loss)
                n_rows += len(rows)
                prev[sel] = dc.one_hot(codes, k)  # detached context
            loss = dc.mul(loss_acc, 1.0 / n_rows)
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.data) * n_rows
            epoch_steps += n_rows
        report.epoch_losses.append(epoch_loss / epoch_steps)
        report.epochs_run = epoch + 1
        if progress:
            print(f"posterior epoch {epoch + 1}: loss {report.epoch_losses[-1]:.4f}",
                  flush=True)
    return posterior, actor, report
