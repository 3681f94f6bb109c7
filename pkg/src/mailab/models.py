"""Parametric networks: state encoder, policy head, critic, discriminator
(optionally with a variational bottleneck) and the latent-code posterior.

All final heads are zero-initialized so training starts at the adversarial
equilibrium: the discriminator outputs 0.5 and the policy is uniform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffcore as dc
from . import navenv
from .diffcore import ParamSet, Tensor
from .errors import ConfigError, UsageError

D_EPS = 1e-7  # discriminator outputs are clamped into [D_EPS, 1 - D_EPS]


@dataclass(frozen=True)
class ModelDims:
    obs_channels: int = 4
    obs_size: int = 32
    conv_channels: tuple[int, int] = (16, 32)
    feature_dim: int = 128
    critic_hidden: int = 64
    disc_hidden: int = 64
    vdb_dim: int = 32
    n_actions: int = 4
    n_codes: int = 4

    @property
    def conv_out_elems(self) -> int:
        side = self.obs_size
        for _ in self.conv_channels:
            side = (side - 1) // 2 + 1  # stride-2 conv output
        return self.conv_channels[-1] * side * side


def _he_conv(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[1] * shape[2] * shape[3]
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape).astype(np.float32)


def _scaled_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32)


def _zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape, dtype=np.float32)


class Encoder:
    """Pixel observation -> feature vector.

    conv(stride 2) + relu, conv(stride 2) + relu, flatten, dense + relu.
    """

    def __init__(self, rng: np.random.Generator, dims: ModelDims | None = None,
                 name: str = "encoder"):
        self.dims = dims or ModelDims()
        d = self.dims
        c1, c2 = d.conv_channels
        self.params = ParamSet(name)
        self.params.add("conv1_w", dc.parameter(_he_conv(rng, (c1, d.obs_channels, 3, 3))))
        self.params.add("conv1_b", dc.parameter(_zeros(c1)))
        self.params.add("conv2_w", dc.parameter(_he_conv(rng, (c2, c1, 3, 3))))
        self.params.add("conv2_b", dc.parameter(_zeros(c2)))
        self.params.add("fc_w", dc.parameter(_scaled_uniform(rng, d.conv_out_elems, d.feature_dim)))
        self.params.add("fc_b", dc.parameter(_zeros(d.feature_dim)))

    @property
    def frozen(self) -> bool:
        return self.params.frozen

    def freeze(self) -> None:
        self.params.freeze()

    def forward(self, obs: Tensor | np.ndarray) -> Tensor:
        """(n,4,32,32) or (4,32,32) observations -> (n,128) or (128,) features."""
        obs = dc.as_tensor(obs)
        single = obs.data.ndim == 3
        x = dc.reshape(obs, (1, *obs.data.shape)) if single else obs
        if x.data.ndim != 4 or x.data.shape[1] != self.dims.obs_channels:
            raise ConfigError(f"encoder expects (n,{self.dims.obs_channels},h,w) input, got {obs.data.shape}")
        p = self.params
        h = dc.relu(dc.add(dc.conv2d(x, p["conv1_w"], 2),
                           dc.reshape(p["conv1_b"], (1, -1, 1, 1))))
        h = dc.relu(dc.add(dc.conv2d(h, p["conv2_w"], 2),
                           dc.reshape(p["conv2_b"], (1, -1, 1, 1))))
        flat = dc.reshape(h, (h.data.shape[0], -1))
        feat = dc.relu(dc.dense(flat, p["fc_w"], p["fc_b"]))
        return dc.reshape(feat, (-1,)) if single else feat

    def features_np(self, obs: np.ndarray) -> np.ndarray:
        """Inference-only forward on a numpy batch."""
        with dc.no_grad():
            return self.forward(obs).data


def encode(obs: np.ndarray, encoder: Encoder) -> np.ndarray:
    """Deterministic feature vector(s) for observation(s)."""
    return encoder.features_np(obs)


class Actor:
    """Linear policy head over features, optionally code-conditioned."""

    def __init__(self, rng: np.random.Generator, dims: ModelDims | None = None,
                 di: bool = False, name: str = "actor"):
        self.dims = dims or ModelDims()
        self.di = di
        in_dim = self.dims.feature_dim + (self.dims.n_codes if di else 0)
        self.params = ParamSet(name)
        self.params.add("w", dc.parameter(_zeros(in_dim, self.dims.n_actions)))
        self.params.add("b", dc.parameter(_zeros(self.dims.n_actions)))
        del rng  # zero-initialized head; rng kept for interface symmetry

    def logits(self, features: Tensor | np.ndarray,
               codes_onehot: Tensor | np.ndarray | None = None) -> Tensor:
        features = dc.as_tensor(features)
        if self.di:
            if codes_onehot is None:
                raise UsageError("code-conditioned actor needs a latent code")
            x = dc.concat([features, dc.as_tensor(codes_onehot)], axis=-1)
        else:
            if codes_onehot is not None:
                raise UsageError("plain actor got a latent code")
            x = features
        return dc.dense(x, self.params["w"], self.params["b"])

    def distribution(self, features, codes_onehot=None) -> Tensor:
        """Valid categorical distribution over the actions."""
        return dc.softmax(self.logits(features, codes_onehot))


def policy_distribution(features, actor: Actor, code: int | None = None) -> np.ndarray:
    """Action probabilities for a single feature vector."""
    feats = np.asarray(features, dtype=np.float32).reshape(1, -1)
    codes = None
    if code is not None:
        codes = dc.one_hot(np.array([code]), actor.dims.n_codes)
    with dc.no_grad():
        return actor.distribution(feats, codes).data[0]


class Critic:
    """Feature -> scalar state value."""

    def __init__(self, rng: np.random.Generator, dims: ModelDims | None = None,
                 name: str = "critic"):
        self.dims = dims or ModelDims()
        d = self.dims
        self.params = ParamSet(name)
        self.params.add("w1", dc.parameter(_scaled_uniform(rng, d.feature_dim, d.critic_hidden)))
        self.params.add("b1", dc.parameter(_zeros(d.critic_hidden)))
        self.params.add("w2", dc.parameter(_zeros(d.critic_hidden, 1)))
        self.params.add("b2", dc.parameter(_zeros(1)))

    def value(self, features: Tensor | np.ndarray) -> Tensor:
        """(n,128) -> (n,) state values."""
        p = self.params
        h = dc.relu(dc.dense(dc.as_tensor(features), p["w1"], p["b1"]))
        return dc.reshape(dc.dense(h, p["w2"], p["b2"]), (-1,))


class Discriminator:
    """(feature, action one-hot) -> probability the pair came from the policy.

    Output is clamped to (0,1) so log D and log(1-D) stay finite. With the
    variational bottleneck, the pair is first compressed through a sampled
    Gaussian code and the per-row KL to N(0, I) is returned alongside.
    """

    def __init__(self, rng: np.random.Generator, dims: ModelDims | None = None,
                 vdb: bool = False, name: str = "disc"):
        self.dims = dims or ModelDims()
        self.vdb = vdb
        d = self.dims
        in_dim = d.feature_dim + d.n_actions
        self.params = ParamSet(name)
        if vdb:
            # tempered init: keeps the initial code KL near zero so the
            # information constraint engages smoothly
            self.params.add(
                "enc_w",
                dc.parameter(0.1 * _scaled_uniform(rng, in_dim, 2 * d.vdb_dim)),
            )
            self.params.add("enc_b", dc.parameter(_zeros(2 * d.vdb_dim)))
            self.params.add("w1", dc.parameter(_scaled_uniform(rng, d.vdb_dim, d.disc_hidden)))
        else:
            self.params.add("w1", dc.parameter(_scaled_uniform(rng, in_dim, d.disc_hidden)))
        self.params.add("b1", dc.parameter(_zeros(d.disc_hidden)))
        self.params.add("w2", dc.parameter(_zeros(d.disc_hidden, 1)))
        self.params.add("b2", dc.parameter(_zeros(1)))
        # dual variable of the information constraint, updated by the trainer
        self.beta = 0.0

    def forward(
        self,
        features: Tensor | np.ndarray,
        actions_onehot: Tensor | np.ndarray,
        rng: np.random.Generator | None = None,
        sample: bool = False,
    ) -> tuple[Tensor, Tensor | None]:
        """Returns (d in (0,1) per row, per-row bottleneck KL or None).

        `sample=True` draws the bottleneck code via the reparameterization
        trick using `rng`; otherwise the mean code is used (deterministic).
        """
        x = dc.concat([dc.as_tensor(features), dc.as_tensor(actions_onehot)], axis=-1)
        p = self.params
        kl = None
        if self.vdb:
            stats = dc.dense(x, p["enc_w"], p["enc_b"])
            mu = dc.narrow(stats, -1, 0, self.dims.vdb_dim)
            # bounded log-variance keeps the KL and its gradients finite
            log_sigma = dc.clip(
                dc.narrow(stats, -1, self.dims.vdb_dim, self.dims.vdb_dim),
                -5.0, 2.0,
            )
            kl = dc.gaussian_kl(mu, log_sigma)
            if sample:
                if rng is None:
                    raise UsageError("sampled bottleneck pass needs an rng")
                eps = rng.standard_normal(mu.data.shape).astype(mu.data.dtype)
                x = dc.add(mu, dc.mul(dc.exp(log_sigma), eps))
            else:
                x = mu
        h = dc.relu(dc.dense(x, p["w1"], p["b1"]))
        logit = dc.reshape(dc.dense(h, p["w2"], p["b2"]), (-1,))
        d = dc.clip(dc.sigmoid(logit), D_EPS, 1.0 - D_EPS)
        return d, kl

    def d_np(self, features: np.ndarray, actions_onehot: np.ndarray) -> np.ndarray:
        """Inference-only discriminator values (mean bottleneck path)."""
        with dc.no_grad():
            return self.forward(features, actions_onehot)[0].data


def discriminate(features, action_onehot, disc: Discriminator):
    """Single-pair discriminator output; with VDB also the KL value."""
    f = np.asarray(features, dtype=np.float32).reshape(1, -1)
    a = np.asarray(action_onehot, dtype=np.float32).reshape(1, -1)
    with dc.no_grad():
        d, kl = disc.forward(f, a)
    if disc.vdb:
        return float(d.data[0]), float(kl.data[0])
    return float(d.data[0])


class Posterior:
    """(feature, previous code one-hot) -> categorical over latent codes."""

    def __init__(self, rng: np.random.Generator, dims: ModelDims | None = None,
                 name: str = "posterior"):
        self.dims = dims or ModelDims()
        d = self.dims
        in_dim = d.feature_dim + d.n_codes
        self.params = ParamSet(name)
        self.params.add("w", dc.parameter(_zeros(in_dim, d.n_codes)))
        self.params.add("b", dc.parameter(_zeros(d.n_codes)))
        del rng

    def logits(self, features: Tensor | np.ndarray,
               prev_codes_onehot: Tensor | np.ndarray) -> Tensor:
        x = dc.concat(
            [dc.as_tensor(features), dc.as_tensor(prev_codes_onehot)], axis=-1
        )
        return dc.dense(x, self.params["w"], self.params["b"])

    def distribution(self, features, prev_codes_onehot) -> Tensor:
        return dc.softmax(self.logits(features, prev_codes_onehot))


def posterior_distribution(features, prev_code: int | None, post: Posterior) -> np.ndarray:
    """Code probabilities for one feature vector. prev_code None means the
    episode start (zero context vector)."""
    f = np.asarray(features, dtype=np.float32).reshape(1, -1)
    prev = np.zeros((1, post.dims.n_codes), dtype=np.float32)
    if prev_code is not None:
        prev[0, prev_code] = 1.0
    with dc.no_grad():
        return post.distribution(f, prev).data[0]


class FeatureCache:
    """Memoized features of logical states under a frozen encoder."""

    def __init__(self, encoder: Encoder):
        if not encoder.frozen:
            raise UsageError("feature cache requires a frozen encoder")
        self.encoder = encoder
        self._cache: dict[tuple, np.ndarray] = {}

    def features(self, states: list[tuple]) -> np.ndarray:
        """states: list of (agent, key, car, has_key) logical tuples."""
        missing = list(dict.fromkeys(s for s in states if s not in self._cache))
        if missing:
            obs = np.stack([navenv.render_cells(*s) for s in missing])
            feats = self.encoder.features_np(obs)
            for s, f in zip(missing, feats):
                self._cache[s] = f
        return np.stack([self._cache[s] for s in states])

    def features_one(self, state: tuple) -> np.ndarray:
        return self.features([state])[0]


# ---------------------------------------------------------------------------
# checkpoint bundles

def save_networks(directory, networks: dict[str, ParamSet | object],
                  shared_encoder: bool, meta: dict | None = None) -> None:
    """One MAILPARM file per network plus a manifest recording the
    shared-encoder linkage and reconstruction metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for key, net in networks.items():
        ps: ParamSet = net if isinstance(net, ParamSet) else net.params
        fname = f"{key}.mailparm"
        dc.save_params(directory / fname, ps.state_arrays())
        files[key] = fname
    manifest = {"shared_encoder": shared_encoder, "files": files}
    if meta:
        manifest["meta"] = meta
    (directory / "networks.json").write_text(json.dumps(manifest, indent=2) + "\n")


def bundle_manifest(directory) -> dict:
    return json.loads((Path(directory) / "networks.json").read_text())


def load_network_params(directory, key: str, ps: ParamSet) -> None:
    """Load one network's parameters from a bundle directory."""
    directory = Path(directory)
    manifest = json.loads((directory / "networks.json").read_text())
    if key not in manifest["files"]:
        raise ConfigError(f"bundle {directory} has no network {key!r}")
    arrays = dc.load_params(directory / manifest["files"][key])
    ps.load_arrays(arrays)
