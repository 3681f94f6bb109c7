"""Clipped-surrogate policy optimization over collected rollouts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..models import Actor, Critic, Encoder
from .config import TrainConfig


@dataclass
class RolloutBuffer:
    """Time-major (T, N) rollout storage across N lockstep environments.

    `rewards` always equals compute_reward(scheme, d_values) of the stored
    discriminator outputs. `obs` is kept only when an encoder needs pixel
    gradients; frozen-encoder runs carry features alone.
    """

    states: list[list[tuple]]  # [T][N] logical states
    features: np.ndarray  # (T, N, F) float32
    actions: np.ndarray  # (T, N) int64
    logps: np.ndarray  # (T, N) float32, behavior log-probs
    d_values: np.ndarray  # (T, N) float32
    rewards: np.ndarray  # (T, N) float32
    values: np.ndarray  # (T, N) float32
    dones: np.ndarray  # (T, N) bool
    bootstrap: np.ndarray  # (N,) float32, V of the state after the last step
    truncation_values: np.ndarray | None = None  # (T, N) float32, V at cap cuts
    obs: np.ndarray | None = None  # (T, N, 4, 32, 32) float32
    codes: np.ndarray | None = None  # (T, N) int64
    prev_codes: np.ndarray | None = None  # (T, N) int64, -1 at episode start
    log_q: np.ndarray | None = None  # (T, N) float32

    @property
    def n_steps(self) -> int:
        return self.rewards.size


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap: np.ndarray,
    gamma: float,
    lam: float,
    truncation_values: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over (T, N) arrays.

    Episode boundaries (dones) cut the lambda chain. True terminals carry no
    tail value; time-limit truncations bootstrap from `truncation_values`
    (the critic's value of the state the cap cut off), which keeps reward
    streams comparable between finishing and merely surviving.
    Returns raw (un-normalized) advantages and the value targets.
    """
    T = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=np.float64)
    running = np.zeros(rewards.shape[1], dtype=np.float64)
    next_value = bootstrap.astype(np.float64)
    for t in range(T - 1, -1, -1):
        alive = 1.0 - dones[t].astype(np.float64)
        tail = gamma * next_value * alive
        if truncation_values is not None:
            tail = tail + gamma * truncation_values[t]
        delta = rewards[t] + tail - values[t]
        running = delta + gamma * lam * alive * running
        adv[t] = running
        next_value = values[t].astype(np.float64)
    return adv, adv + values


def clipped_surrogate(logp_new: dc.Tensor, logp_old: np.ndarray,
                      advantages: np.ndarray, clip: float) -> dc.Tensor:
    """Mean negated PPO surrogate: -E[min(r A, clip(r) A)]."""
    ratio = dc.exp(dc.sub(logp_new, logp_old))
    s1 = dc.mul(ratio, advantages)
    s2 = dc.mul(dc.clip(ratio, 1.0 - clip, 1.0 + clip), advantages)
    minimum = dc.sub(s1, dc.relu(dc.sub(s1, s2)))  # min(a,b) = a - relu(a-b)
    return dc.neg(dc.tmean(minimum))


@dataclass
class PPOStats:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float


def ppo_update(
    buffer: RolloutBuffer,
    advantages: np.ndarray,
    returns: np.ndarray,
    actor: Actor,
    critic: Critic,
    encoder: Encoder | None,
    opt_policy: dc.Adam,
    opt_critic: dc.Adam,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> PPOStats:
    """Several epochs of clipped-surrogate updates over shuffled minibatches.

    `encoder` is passed only when it is trainable: minibatches then forward
    pixels through it so policy and value gradients reach the conv stack.
    """
    B = buffer.n_steps
    flat_feats = buffer.features.reshape(B, -1)
    flat_obs = buffer.obs.reshape(B, *buffer.obs.shape[2:]) if encoder is not None else None
    flat_actions = buffer.actions.reshape(B)
    flat_logp = buffer.logps.reshape(B)
    flat_codes = buffer.codes.reshape(B) if buffer.codes is not None else None

    adv = advantages.reshape(B).astype(np.float64)
    adv = ((adv - adv.mean()) / (adv.std() + 1e-8)).astype(np.float32)
    rets = returns.reshape(B)

    last = PPOStats(0.0, 0.0, 0.0, 0.0)
    kl_sum, kl_count = 0.0, 0
    for _epoch in range(cfg.ppo_epochs):
        perm = rng.permutation(B)
        for start in range(0, B, cfg.minibatch_size):
            idx = perm[start : start + cfg.minibatch_size]
            if encoder is not None:
                feats = encoder.forward(flat_obs[idx])
            else:
                feats = dc.as_tensor(flat_feats[idx])
            codes_oh = (
                dc.one_hot(flat_codes[idx], actor.dims.n_codes)
                if flat_codes is not None
                else None
            )
            logits = actor.logits(feats, codes_oh)
            logp_all = dc.log_softmax(logits)
            logp_new = dc.take_along_last(logp_all, flat_actions[idx])
            policy_loss = clipped_surrogate(
                logp_new, flat_logp[idx], adv[idx], cfg.ppo_clip
            )
            probs = dc.softmax(logits)
            entropy = dc.neg(dc.tmean(dc.tsum(dc.mul(probs, logp_all), axis=-1)))
            v = critic.value(feats)
            verr = dc.sub(v, rets[idx])
            value_loss = dc.tmean(dc.mul(verr, verr))
            total = dc.add(
                dc.add(policy_loss, dc.mul(value_loss, cfg.value_coef)),
                dc.mul(entropy, -cfg.entropy_coef),
            )
            opt_policy.zero_grad()
            opt_critic.zero_grad()
            total.backward()
            opt_policy.step()
            opt_critic.step()
            kl_sum += float(np.mean(flat_logp[idx] - logp_new.data))
            kl_count += 1
            last = PPOStats(
                policy_loss=float(policy_loss.data),
                value_loss=float(value_loss.data),
                entropy=float(entropy.data),
                approx_kl=0.0,
            )
    last.approx_kl = kl_sum / max(kl_count, 1)
    return last
