"""Discriminator training.

The discriminator is pushed to output 1 on policy pairs and 0 on expert
pairs, so small outputs mean "expert-like" and every reward scheme rewards
small D. With the variational bottleneck the loss carries a dual-updated
information penalty beta * (KL - Ic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..errors import ConfigError
from ..models import Discriminator, Encoder
from .config import TrainConfig


@dataclass
class Batch:
    """One side of the discriminator's training data.

    `features` feeds the head directly; when `obs` is given instead, the
    pixels are forwarded through `encoder` in-graph so the conv stack
    receives discriminator gradients (trainable-encoder modes).
    """

    actions: np.ndarray  # (B,) int64
    features: np.ndarray | None = None  # (B, F) float32
    obs: np.ndarray | None = None  # (B, 4, 32, 32) float32

    def __post_init__(self):
        if (self.features is None) == (self.obs is None):
            raise ConfigError("batch needs exactly one of features/obs")
        if len(self.actions) == 0:
            raise ConfigError("empty discriminator batch")

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class DiscriminatorStats:
    loss: float
    accuracy: float  # fraction classified correctly at the 0.5 threshold
    kl: float  # bottleneck KL (0 without VDB)
    beta: float


def _forward_side(
    disc: Discriminator,
    encoder: Encoder | None,
    batch: Batch,
    idx: np.ndarray,
    rng: np.random.Generator,
):
    if batch.obs is not None:
        if encoder is None:
            raise ConfigError("pixel batches need an encoder")
        feats = encoder.forward(batch.obs[idx])
    else:
        feats = dc.as_tensor(batch.features[idx])
    onehot = dc.one_hot(batch.actions[idx], disc.dims.n_actions)
    return disc.forward(feats, onehot, rng=rng, sample=disc.vdb)


def discriminator_update(
    disc: Discriminator,
    encoder: Encoder | None,
    optimizer: dc.Adam,
    policy_batch: Batch,
    expert_batch: Batch,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> DiscriminatorStats:
    """One pass of minibatch gradient steps on the adversarial objective.

    Minimizes -(E_policy[log D] + E_expert[log(1 - D)]). Returns stats
    averaged over the minibatches (accuracy from pre-step outputs).
    """
    per_epoch = min(len(policy_batch), len(expert_batch))
    n_mini = max(per_epoch // cfg.disc_minibatch, 1)
    loss_sum = acc_sum = kl_sum = 0.0
    count = 0
    for _epoch in range(cfg.disc_epochs):
        p_perm = rng.permutation(len(policy_batch))[:per_epoch]
        e_perm = rng.permutation(len(expert_batch))[:per_epoch]
        for m in range(n_mini):
            sl = slice(m * cfg.disc_minibatch, (m + 1) * cfg.disc_minibatch)
            p_idx, e_idx = p_perm[sl], e_perm[sl]
            d_pol, kl_pol = _forward_side(disc, encoder, policy_batch, p_idx, rng)
            d_exp, kl_exp = _forward_side(disc, encoder, expert_batch, e_idx, rng)
            loss = dc.neg(
                dc.add(
                    dc.tmean(dc.log(d_pol)),
                    dc.tmean(dc.log(dc.sub(1.0, d_exp))),
                )
            )
            kl_value = 0.0
            if disc.vdb:
                kl_mean = dc.tmean(dc.concat([kl_pol, kl_exp], axis=0))
                kl_value = float(kl_mean.data)
                loss = dc.add(loss, dc.mul(dc.sub(kl_mean, cfg.ic), disc.beta))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            if disc.vdb:
                # dual ascent on the information constraint
                disc.beta = max(0.0, disc.beta + cfg.beta_lr * (kl_value - cfg.ic))
            correct = np.count_nonzero(d_pol.data > 0.5) + np.count_nonzero(
                d_exp.data < 0.5
            )
            acc_sum += correct / (len(p_idx) + len(e_idx))
            loss_sum += float(loss.data)
            kl_sum += kl_value
            count += 1
    return DiscriminatorStats(
        loss=loss_sum / count,
        accuracy=acc_sum / count,
        kl=kl_sum / count,
        beta=disc.beta,
    )
