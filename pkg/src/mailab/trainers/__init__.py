"""Training procedures: behavior cloning, posterior pre-training,
discriminator updates with penalized rewards, PPO with GAE, and the
composed adversarial-imitation main loops."""

from .config import TrainConfig, ENCODER_MODES
from .rewards import RewardScheme, compute_reward, D_CLAMP
from .ppo import RolloutBuffer, gae_advantages, ppo_update, clipped_surrogate
from .gail import DiscriminatorStats, discriminator_update
from .bc import BCReport, bc_pretrain
from .posterior import PosteriorReport, posterior_pretrain
from .loop import (
    CurvePoint,
    EvalReport,
    TrainReport,
    evaluate,
    rollout_score,
    train,
)

__all__ = [
    "TrainConfig",
    "ENCODER_MODES",
    "RewardScheme",
    "compute_reward",
    "D_CLAMP",
    "RolloutBuffer",
    "gae_advantages",
    "ppo_update",
    "clipped_surrogate",
    "DiscriminatorStats",
    "discriminator_update",
    "BCReport",
    "bc_pretrain",
    "PosteriorReport",
    "posterior_pretrain",
    "CurvePoint",
    "EvalReport",
    "TrainReport",
    "evaluate",
    "rollout_score",
    "train",
]
