"""Discriminator-to-reward transformations.

The adversarial game balances at D = 0.5, so the shifted, linear and
tangent schemes are built to cross zero exactly there: the agent earns
positive reward only while it looks more expert-like than the equilibrium,
and pays for looking less so. The plain and scaled log schemes stay
positive everywhere, which rewards merely staying alive.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

D_CLAMP = 1e-7


class RewardScheme(str, Enum):
    LOG = "log"
    LOG_SCALED = "log_scaled"
    LOG_SHIFT = "log_shift"
    LINEAR = "linear"
    TAN = "tan"


def compute_reward(scheme: RewardScheme | str, d):
    """Shaped reward for discriminator output(s) d in (0,1).

    Accepts scalars or arrays; d is clamped to [1e-7, 1-1e-7] first.
    """
    scheme = RewardScheme(scheme)
    d = np.clip(d, D_CLAMP, 1.0 - D_CLAMP)
    if scheme is RewardScheme.LOG:
        return -np.log(d)
    if scheme is RewardScheme.LOG_SCALED:
        return -np.log(d) / 10.0
    if scheme is RewardScheme.LOG_SHIFT:
        return -np.log(d + 0.5)
    if scheme is RewardScheme.LINEAR:
        return 0.5 - d
    return np.tan(0.5 - d)
