"""GAE and clipped-surrogate tests against direct-definition oracles."""

import numpy as np
import pytest

from mailab import diffcore as dc
from mailab.trainers import clipped_surrogate, gae_advantages


def gae_oracle(rewards, values, dones, bootstrap, gamma, lam, trunc=None):
    """Direct double-loop evaluation of the lambda-weighted advantage sum."""
    rewards = rewards.astype(np.float64)
    values = values.astype(np.float64)
    bootstrap = bootstrap.astype(np.float64)
    T, N = rewards.shape
    adv = np.zeros((T, N))
    for n in range(N):
        for t in range(T):
            acc, factor = 0.0, 1.0
            for l_off in range(t, T):
                next_v = bootstrap[n] if l_off + 1 == T else values[l_off + 1, n]
                alive = 0.0 if dones[l_off, n] else 1.0
                tail = gamma * next_v * alive
                if trunc is not None:
                    tail += gamma * trunc[l_off, n]
                delta = rewards[l_off, n] + tail - values[l_off, n]
                acc += factor * delta
                if dones[l_off, n]:
                    break
                factor *= gamma * lam
            adv[t, n] = acc
    return adv


class TestGAE:
    def test_single_transition_full_bootstrap(self):
        # gamma = lambda = 1: advantage = r + V(s') - V(s)
        rewards = np.array([[2.0]], dtype=np.float32)
        values = np.array([[0.7]], dtype=np.float32)
        dones = np.array([[False]])
        bootstrap = np.array([1.5], dtype=np.float32)
        adv, rets = gae_advantages(rewards, values, dones, bootstrap, 1.0, 1.0)
        assert adv[0, 0] == pytest.approx(2.0 + 1.5 - 0.7, abs=1e-6)
        assert rets[0, 0] == pytest.approx(adv[0, 0] + 0.7, abs=1e-6)

    def test_zero_rewards_zero_values_gives_zero(self):
        rewards = np.zeros((6, 3), dtype=np.float32)
        values = np.zeros((6, 3), dtype=np.float32)
        dones = np.zeros((6, 3), dtype=bool)
        bootstrap = np.zeros(3, dtype=np.float32)
        adv, rets = gae_advantages(rewards, values, dones, bootstrap, 0.99, 0.95)
        assert np.all(adv == 0) and np.all(rets == 0)

    def test_matches_recursive_oracle_on_random_buffer(self):
        rng = np.random.default_rng(0)
        T, N = 50, 4
        rewards = rng.standard_normal((T, N)).astype(np.float32)
        values = rng.standard_normal((T, N)).astype(np.float32)
        dones = rng.random((T, N)) < 0.1
        bootstrap = rng.standard_normal(N).astype(np.float32)
        adv, rets = gae_advantages(rewards, values, dones, bootstrap, 0.99, 0.95)
        expect = gae_oracle(rewards, values, dones, bootstrap, 0.99, 0.95)
        assert np.abs(adv - expect).max() < 1e-6
        assert np.abs(rets - (expect + values)).max() < 1e-5

    def test_done_cuts_the_chain(self):
        rewards = np.array([[1.0], [1.0]], dtype=np.float32)
        values = np.array([[0.0], [5.0]], dtype=np.float32)
        dones = np.array([[True], [False]])
        bootstrap = np.array([9.0], dtype=np.float32)
        adv, _ = gae_advantages(rewards, values, dones, bootstrap, 0.9, 0.9)
        # first step is terminal: no bootstrap from values[1] or beyond
        assert adv[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_time_limit_truncation_bootstraps_the_tail(self):
        rewards = np.array([[1.0]], dtype=np.float32)
        values = np.array([[0.0]], dtype=np.float32)
        dones = np.array([[True]])
        bootstrap = np.array([9.0], dtype=np.float32)  # reset state, ignored
        trunc = np.array([[4.0]], dtype=np.float32)  # V of the cut-off state
        adv, _ = gae_advantages(
            rewards, values, dones, bootstrap, 0.9, 0.9,
            truncation_values=trunc,
        )
        assert adv[0, 0] == pytest.approx(1.0 + 0.9 * 4.0, abs=1e-6)

    def test_matches_oracle_with_truncations(self):
        rng = np.random.default_rng(5)
        T, N = 30, 3
        rewards = rng.standard_normal((T, N)).astype(np.float32)
        values = rng.standard_normal((T, N)).astype(np.float32)
        dones = rng.random((T, N)) < 0.15
        trunc = np.where(
            dones & (rng.random((T, N)) < 0.5),
            rng.standard_normal((T, N)),
            0.0,
        ).astype(np.float32)
        bootstrap = rng.standard_normal(N).astype(np.float32)
        adv, _ = gae_advantages(rewards, values, dones, bootstrap, 0.99, 0.95,
                                truncation_values=trunc)
        expect = gae_oracle(rewards, values, dones, bootstrap, 0.99, 0.95,
                            trunc=trunc)
        assert np.abs(adv - expect).max() < 1e-6


class TestClippedSurrogate:
    def _loss(self, logp_new, logp_old, adv, clip=0.2):
        t = dc.parameter(np.array(logp_new, dtype=np.float64))
        return clipped_surrogate(
            t, np.array(logp_old), np.array(adv), clip
        )

    def test_ratio_above_clip_with_positive_advantage(self):
        # ratio 2.0, advantage +1: surrogate pinned at (1 + clip) * adv
        loss = self._loss([np.log(2.0)], [0.0], [1.0])
        assert float(loss.data) == pytest.approx(-1.2, abs=1e-9)

    def test_ratio_below_clip_with_negative_advantage(self):
        # ratio 0.5, advantage -1: the pessimistic min takes the clipped
        # branch (1 - clip) * adv = -0.8
        loss = self._loss([np.log(0.5)], [0.0], [-1.0])
        assert float(loss.data) == pytest.approx(0.8, abs=1e-9)

    def test_zero_advantage_zero_loss(self):
        loss = self._loss([0.3, -0.2], [0.0, 0.0], [0.0, 0.0])
        assert float(loss.data) == 0.0

    def test_unclipped_region_gradient_matches_policy_gradient(self):
        logp = dc.parameter(np.array([0.0]))
        loss = clipped_surrogate(logp, np.array([0.0]), np.array([2.0]), 0.2)
        loss.backward()
        # d/dlogp of -(exp(logp - old) * adv) at ratio 1 = -adv
        assert logp.grad[0] == pytest.approx(-2.0, abs=1e-9)
