"""Composed adversarial-imitation training and evaluation.

Rollouts run N environments in lockstep inside a single thread, so runs are
deterministic for a fixed seed. Rewards come from the discriminator through
the configured penalization scheme; the environment's own reward is used
only by evaluation.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc
from .. import navenv
from ..demogen import DemoDataset
from ..errors import ConfigError
from ..models import (
    Actor,
    Critic,
    Discriminator,
    Encoder,
    FeatureCache,
    ModelDims,
    Posterior,
)
from .config import TrainConfig, rng_stream
from .gail import Batch, discriminator_update
from .ppo import RolloutBuffer, gae_advantages, ppo_update
from .rewards import compute_reward

EVAL_SEED_BASE = 2_000_000_000  # shared across runs so scores are comparable


def _sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((probs.shape[0], 1))
    idx = (probs.cumsum(axis=-1) < u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1).astype(np.int64)


class _VecEnvs:
    """N independent episodes stepped in lockstep, auto-resetting when done."""

    def __init__(self, n: int, reset_rng: np.random.Generator):
        self._rng = reset_rng
        self.states = [self._fresh() for _ in range(n)]

    def _fresh(self) -> navenv.EnvState:
        return navenv.reset(int(self._rng.integers(0, 2**62)))

    def logical(self) -> list[tuple]:
        return [(s.agent, s.key, s.car, s.has_key) for s in self.states]

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, list[tuple[int, tuple]]]:
        """Returns done flags and, for episodes the time cap cut off, their
        pre-reset logical states (true terminals are not reported)."""
        dones = np.zeros(len(self.states), dtype=bool)
        truncated: list[tuple[int, tuple]] = []
        for i, action in enumerate(actions):
            nxt, _reward, done = navenv.step(self.states[i], int(action))
            dones[i] = done
            if done:
                if not navenv.is_success(nxt):
                    truncated.append(
                        (i, (nxt.agent, nxt.key, nxt.car, nxt.has_key))
                    )
                self.states[i] = self._fresh()
            else:
                self.states[i] = nxt
        return dones, truncated


class _Featurizer:
    """Uniform feature access for frozen (cached) and live encoders."""

    def __init__(self, encoder: Encoder):
        self.encoder = encoder
        self.cache = FeatureCache(encoder) if encoder.frozen else None

    @property
    def frozen(self) -> bool:
        return self.cache is not None

    def features(self, logical: list[tuple]) -> tuple[np.ndarray, np.ndarray | None]:
        """Returns (features, obs or None). Pixels only exist on live paths."""
        if self.cache is not None:
            return self.cache.features(logical), None
        obs = np.stack([navenv.render_cells(*s) for s in logical])
        return self.encoder.features_np(obs), obs


@dataclass
class EvalReport:
    n_episodes: int
    mean: float
    std: float
    success_rate: float
    returns: np.ndarray
    lengths: np.ndarray


@dataclass
class CurvePoint:
    step: int
    score_mean: float
    score_std: float
    disc_acc: float
    reward_mean: float


@dataclass
class TrainReport:
    config: TrainConfig
    curve: list[CurvePoint] = field(default_factory=list)
    final_eval: EvalReport | None = None
    best_score: float = float("-inf")
    wall_clock_sec: float = 0.0
    encoder_digest_start: str | None = None
    encoder_digest_end: str | None = None
    networks: dict = field(default_factory=dict)
    shared_encoder: bool = False

    def scores(self) -> list[tuple[int, float]]:
        return [(p.step, p.score_mean) for p in self.curve]


def rollout_score(action_fn, n_episodes: int, seed: int) -> EvalReport:
    """Score an arbitrary policy function EnvState -> action (sequential)."""
    reset_rng = rng_stream(seed, "eval-resets")
    returns, lengths, successes = [], [], 0
    for _ in range(n_episodes):
        state = navenv.reset(int(reset_rng.integers(0, 2**62)))
        total, done = 0.0, False
        while not done:
            state, reward, done = navenv.step(state, action_fn(state))
            total += reward
        returns.append(total)
        lengths.append(state.t)
        if state.has_key and state.agent == state.car:
            successes += 1
    returns = np.array(returns)
    return EvalReport(
        n_episodes=n_episodes,
        mean=float(returns.mean()),
        std=float(returns.std()),
        success_rate=successes / n_episodes,
        returns=returns,
        lengths=np.array(lengths),
    )


def evaluate(
    actor: Actor,
    encoder: Encoder | FeatureCache,
    n_episodes: int,
    seed: int,
    posterior: Posterior | None = None,
) -> EvalReport:
    """Stochastic policy rollouts on fresh seeded episodes, in lockstep.

    With a posterior, a latent code is sampled each step and fed to the
    code-conditioned policy head.
    """
    if isinstance(encoder, FeatureCache):
        featurizer = _Featurizer(encoder.encoder)
        featurizer.cache = encoder
    else:
        featurizer = _Featurizer(encoder)
    reset_rng = rng_stream(seed, "eval-resets")
    action_rng = rng_stream(seed, "eval-actions")
    code_rng = rng_stream(seed, "eval-codes")
    states = [navenv.reset(int(reset_rng.integers(0, 2**62))) for _ in range(n_episodes)]
    active = np.ones(n_episodes, dtype=bool)
    returns = np.zeros(n_episodes)
    lengths = np.zeros(n_episodes, dtype=np.int64)
    success = np.zeros(n_episodes, dtype=bool)
    k = actor.dims.n_codes
    prev_codes = np.full(n_episodes, -1, dtype=np.int64)
    while active.any():
        idx = np.flatnonzero(active)
        logical = [
            (states[i].agent, states[i].key, states[i].car, states[i].has_key)
            for i in idx
        ]
        feats, _obs = featurizer.features(logical)
        codes_oh = None
        if posterior is not None:
            prev_oh = np.zeros((len(idx), k), dtype=np.float32)
            live = prev_codes[idx] >= 0
            prev_oh[np.flatnonzero(live), prev_codes[idx][live]] = 1.0
            with dc.no_grad():
                q = posterior.distribution(feats, prev_oh).data
            codes = _sample_categorical(q, code_rng)
            prev_codes[idx] = codes
            codes_oh = dc.one_hot(codes, k)
        with dc.no_grad():
            probs = actor.distribution(feats, codes_oh).data
        actions = _sample_categorical(probs, action_rng)
        for j, i in enumerate(idx):
            nxt, reward, done = navenv.step(states[i], int(actions[j]))
            returns[i] += reward
            states[i] = nxt
            if done:
                active[i] = False
                lengths[i] = nxt.t
                success[i] = nxt.has_key and nxt.agent == nxt.car
    return EvalReport(
        n_episodes=n_episodes,
        mean=float(returns.mean()),
        std=float(returns.std()),
        success_rate=float(success.mean()),
        returns=returns,
        lengths=lengths,
    )


def _collect_rollout(
    vec: _VecEnvs,
    featurizer: _Featurizer,
    disc_featurizer: _Featurizer,
    actor: Actor,
    critic: Critic,
    disc: Discriminator,
    posterior: Posterior | None,
    prev_codes: np.ndarray,
    cfg: TrainConfig,
    action_rng: np.random.Generator,
    code_rng: np.random.Generator,
) -> RolloutBuffer:
    T = cfg.rollout_steps // cfg.n_envs
    n = cfg.n_envs
    fdim = actor.dims.feature_dim
    k = actor.dims.n_codes
    live = not featurizer.frozen

    states_log: list[list[tuple]] = []
    features = np.zeros((T, n, fdim), dtype=np.float32)
    obs_store = (
        np.zeros((T, n, 4, navenv.CANVAS, navenv.CANVAS), dtype=np.float32)
        if live
        else None
    )
    actions = np.zeros((T, n), dtype=np.int64)
    logps = np.zeros((T, n), dtype=np.float32)
    d_values = np.zeros((T, n), dtype=np.float32)
    values = np.zeros((T, n), dtype=np.float32)
    dones = np.zeros((T, n), dtype=bool)
    trunc_values = np.zeros((T, n), dtype=np.float32)
    codes_store = np.zeros((T, n), dtype=np.int64) if posterior is not None else None
    prev_store = np.zeros((T, n), dtype=np.int64) if posterior is not None else None
    logq_store = np.zeros((T, n), dtype=np.float32) if posterior is not None else None

    for t in range(T):
        logical = vec.logical()
        states_log.append(logical)
        feats, obs = featurizer.features(logical)
        features[t] = feats
        if live:
            obs_store[t] = obs
        codes_oh = None
        if posterior is not None:
            prev_oh = np.zeros((n, k), dtype=np.float32)
            has_prev = prev_codes >= 0
            prev_oh[np.flatnonzero(has_prev), prev_codes[has_prev]] = 1.0
            with dc.no_grad():
                q = posterior.distribution(feats, prev_oh).data
            codes = _sample_categorical(q, code_rng)
            prev_store[t] = prev_codes
            codes_store[t] = codes
            logq_store[t] = np.log(
                np.clip(q[np.arange(n), codes], 1e-12, None)
            ).astype(np.float32)
            prev_codes[:] = codes
            codes_oh = dc.one_hot(codes, k)
        with dc.no_grad():
            probs = actor.distribution(feats, codes_oh).data
            values[t] = critic.value(feats).data
        acts = _sample_categorical(probs, action_rng)
        actions[t] = acts
        logps[t] = np.log(probs[np.arange(n), acts])
        if disc_featurizer is featurizer:
            disc_feats = feats
        elif obs is not None:  # split encoders: reuse the rendered pixels
            disc_feats = disc_featurizer.encoder.features_np(obs)
        else:
            disc_feats, _ = disc_featurizer.features(logical)
        d_values[t] = disc.d_np(disc_feats, dc.one_hot(acts, actor.dims.n_actions))
        done, truncated = vec.step(acts)
        dones[t] = done
        if truncated:
            # time-limit cuts bootstrap the critic's view of the lost tail
            t_feats, _ = featurizer.features([s for _i, s in truncated])
            with dc.no_grad():
                t_vals = critic.value(t_feats).data
            for (i, _s), v in zip(truncated, t_vals):
                trunc_values[t, i] = v
        if posterior is not None:
            prev_codes[done] = -1  # codes restart with the episode

    rewards = compute_reward(cfg.reward_scheme, d_values).astype(np.float32)
    final_feats, _ = featurizer.features(vec.logical())
    with dc.no_grad():
        bootstrap = critic.value(final_feats).data.astype(np.float32)
    return RolloutBuffer(
        states=states_log,
        features=features,
        actions=actions,
        logps=logps,
        d_values=d_values,
        rewards=rewards,
        values=values,
        dones=dones,
        bootstrap=bootstrap,
        truncation_values=trunc_values,
        obs=obs_store,
        codes=codes_store,
        prev_codes=prev_store,
        log_q=logq_store,
    )


def _digest(ps) -> str:
    return hashlib.sha256(ps.byte_digest()).hexdigest()


def train(
    cfg: TrainConfig,
    demos: DemoDataset,
    bc_encoder_arrays: dict[str, np.ndarray] | None = None,
    posterior_arrays: dict[str, np.ndarray] | None = None,
    dims: ModelDims | None = None,
    progress: bool = False,
) -> TrainReport:
    """Run one full adversarial-imitation experiment.

    bc_encoder_arrays: phase-1 encoder checkpoint, required by load modes.
    posterior_arrays: phase-2 posterior checkpoint, required in DI mode.
    """
    t0 = time.monotonic()
    cfg.validate()
    dims = dims or ModelDims()
    mode = cfg.global_encoder
    if mode in ("load_fix", "load_train") and bc_encoder_arrays is None:
        raise ConfigError(
            f"global_encoder={mode!r} needs the phase-1 behavior-cloning "
            "encoder checkpoint (run train-bc first)"
        )
    if cfg.di and posterior_arrays is None:
        raise ConfigError(
            "latent-code mode needs the phase-2 posterior checkpoint "
            "(run train-posterior first)"
        )

    # --- networks -----------------------------------------------------
    shared = mode != "none"
    if shared:
        encoder = Encoder(rng_stream(cfg.seed, "init-encoder"), dims)
        if mode in ("load_fix", "load_train"):
            encoder.params.load_arrays(bc_encoder_arrays)
        if mode == "load_fix":
            encoder.freeze()
        policy_enc = disc_enc = encoder
    else:
        policy_enc = Encoder(rng_stream(cfg.seed, "init-policy-encoder"), dims,
                             name="policy_encoder")
        disc_enc = Encoder(rng_stream(cfg.seed, "init-disc-encoder"), dims,
                           name="disc_encoder")
    actor = Actor(rng_stream(cfg.seed, "init-actor"), dims, di=cfg.di)
    critic = Critic(rng_stream(cfg.seed, "init-critic"), dims)
    disc = Discriminator(rng_stream(cfg.seed, "init-disc"), dims, vdb=cfg.vdb)
    if cfg.vdb:
        disc.beta = cfg.beta_init
    posterior = None
    if cfg.di:
        posterior = Posterior(rng_stream(cfg.seed, "init-posterior"), dims)
        posterior.params.load_arrays(posterior_arrays)
        posterior.params.freeze()

    featurizer = _Featurizer(policy_enc)
    disc_featurizer = featurizer if shared else _Featurizer(disc_enc)

    # --- optimizers ----------------------------------------------------
    policy_sets = [actor.params]
    disc_sets = [disc.params]
    if not policy_enc.frozen:
        policy_sets.append(policy_enc.params)
        disc_sets.append(disc_enc.params)
    opt_policy = dc.Adam(policy_sets, lr=cfg.policy_lr)
    opt_critic = dc.Adam([critic.params], lr=cfg.policy_lr)
    opt_disc = dc.Adam(disc_sets, lr=cfg.disc_lr)

    # --- rng streams ----------------------------------------------------
    vec = _VecEnvs(cfg.n_envs, rng_stream(cfg.seed, "env-resets"))
    action_rng = rng_stream(cfg.seed, "rollout-actions")
    code_rng = rng_stream(cfg.seed, "rollout-codes")
    ppo_rng = rng_stream(cfg.seed, "ppo-shuffle")
    disc_rng = rng_stream(cfg.seed, "disc-shuffle")
    expert_rng = rng_stream(cfg.seed, "expert-sample")

    report = TrainReport(config=cfg, shared_encoder=shared)
    if shared:
        report.encoder_digest_start = _digest(policy_enc.params)

    prev_codes = np.full(cfg.n_envs, -1, dtype=np.int64)
    steps = 0
    iteration = 0
    expert_actions_all = demos.records[:, 7].astype(np.int64)
    while steps < cfg.total_steps:
        buffer = _collect_rollout(
            vec, featurizer, disc_featurizer, actor, critic, disc, posterior,
            prev_codes, cfg, action_rng, code_rng,
        )
        steps += buffer.n_steps

        # expert minibatch for the discriminator
        e_idx = expert_rng.integers(0, demos.count, size=cfg.rollout_steps)
        e_states = [demos.logical_state(int(i)) for i in e_idx]
        e_actions = expert_actions_all[e_idx]
        B = buffer.n_steps
        if featurizer.frozen:
            policy_batch = Batch(
                actions=buffer.actions.reshape(B),
                features=buffer.features.reshape(B, -1),
            )
            expert_batch = Batch(
                actions=e_actions,
                features=disc_featurizer.cache.features(e_states),
            )
            disc_encoder_arg = None
        else:
            policy_batch = Batch(
                actions=buffer.actions.reshape(B),
                obs=buffer.obs.reshape(B, *buffer.obs.shape[2:]),
            )
            expert_batch = Batch(
                actions=e_actions,
                obs=np.stack([navenv.render_cells(*s) for s in e_states]),
            )
            disc_encoder_arg = disc_enc
        disc_stats = discriminator_update(
            disc, disc_encoder_arg, opt_disc, policy_batch, expert_batch, cfg,
            disc_rng,
        )

        rewards = buffer.rewards
        if cfg.di:
            rewards = rewards + cfg.di_bonus_weight * buffer.log_q
        advantages, returns = gae_advantages(
            rewards, buffer.values, buffer.dones, buffer.bootstrap,
            cfg.gamma, cfg.gae_lambda,
            truncation_values=buffer.truncation_values,
        )
        ppo_update(
            buffer, advantages, returns, actor, critic,
            policy_enc if not featurizer.frozen else None,
            opt_policy, opt_critic, cfg, ppo_rng,
        )

        eval_report = evaluate(
            actor,
            featurizer.cache if featurizer.frozen else policy_enc,
            cfg.eval_episodes,
            EVAL_SEED_BASE + iteration,
            posterior=posterior,
        )
        report.curve.append(
            CurvePoint(
                step=steps,
                score_mean=eval_report.mean,
                score_std=eval_report.std,
                disc_acc=disc_stats.accuracy,
                reward_mean=float(buffer.rewards.mean()),
            )
        )
        report.best_score = max(report.best_score, eval_report.mean)
        if progress:
            print(
                f"iter {iteration} step {steps}: score {eval_report.mean:.2f} "
                f"disc_acc {disc_stats.accuracy:.3f} "
                f"reward {buffer.rewards.mean():+.4f}",
                flush=True,
            )
        iteration += 1

    report.final_eval = evaluate(
        actor,
        featurizer.cache if featurizer.frozen else policy_enc,
        cfg.final_eval_episodes,
        EVAL_SEED_BASE - 1,
        posterior=posterior,
    )
    if shared:
        report.encoder_digest_end = _digest(policy_enc.params)
        report.networks["encoder"] = policy_enc
    else:
        report.networks["policy_encoder"] = policy_enc
        report.networks["disc_encoder"] = disc_enc
    report.networks["actor"] = actor
    report.networks["critic"] = critic
    report.networks["disc"] = disc
    if posterior is not None:
        report.networks["posterior"] = posterior
    report.wall_clock_sec = time.monotonic() - t0
    return report
