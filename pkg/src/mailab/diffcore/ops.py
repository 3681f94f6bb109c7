"""Differentiable operations.

Every op validates shapes (raising ConfigError), computes the forward value
with plain numpy, and registers a vector-Jacobian closure. Kernels are
deterministic: accumulation order is fixed by construction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor, as_tensor, make_node


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _pair(a, b) -> tuple[Tensor, Tensor]:
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        if isinstance(b, (int, float)):
            b = as_tensor(np.asarray(b, dtype=a.dtype.type))
        else:
            b = as_tensor(b)
    return a, b


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data + b.data

    def vjp(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return make_node(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data - b.data

    def vjp(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(-g, b.data.shape))

    return make_node(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data * b.data

    def vjp(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return make_node(out, (a, b), vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        a.accumulate(-g)

    return make_node(-a.data, (a,), vjp)


def matmul(a, b) -> Tensor:
    """a @ b for a of rank 1 or 2 and b of rank 2."""
    a, b = _pair(a, b)
    if b.data.ndim != 2 or a.data.ndim not in (1, 2):
        raise ConfigError(
            f"matmul supports (n,i)@(i,o) or (i,)@(i,o), got {a.shape} @ {b.shape}"
        )
    if a.data.shape[-1] != b.data.shape[0]:
        raise ConfigError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        if a.data.ndim == 1:
            a.accumulate(g @ b.data.T)
            b.accumulate(np.outer(a.data, g))
        else:
            a.accumulate(g @ b.data.T)
            b.accumulate(a.data.T @ g)

    return make_node(out, (a, b), vjp)


def dense(x, w, b) -> Tensor:
    """Affine layer y = x @ w + b with exact analytic gradients."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if w.data.ndim != 2 or b.data.shape != (w.data.shape[1],):
        raise ConfigError(
            f"dense expects w (i,o) and b (o,), got {w.shape} and {b.shape}"
        )
    return add(matmul(x, w), b)


def conv2d(x, kernels, stride: int) -> Tensor:
    """3x3 cross-correlation with zero padding 1.

    x: (n,c,h,w) or (c,h,w); kernels: (k,c,3,3); stride 1 or 2.
    Output spatial size is ceil(h/stride) x ceil(w/stride).
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    squeeze = x.data.ndim == 3
    if stride not in (1, 2):
        raise ConfigError(f"conv2d stride must be 1 or 2, got {stride}")
    if kernels.data.ndim != 4 or kernels.data.shape[2:] != (3, 3):
        raise ConfigError(f"conv2d kernels must be (k,c,3,3), got {kernels.shape}")
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4:
        raise ConfigError(f"conv2d input must be (n,c,h,w) or (c,h,w), got {x.shape}")
    n, c, h, w = xd.shape
    k = kernels.data.shape[0]
    if kernels.data.shape[1] != c:
        raise ConfigError(
            f"conv2d channel mismatch: input has {c}, kernels expect {kernels.data.shape[1]}"
        )
    if h < 3 or w < 3:
        raise ConfigError(f"conv2d needs h,w >= 3, got {h}x{w}")

    ho = (h - 1) // stride + 1
    wo = (w - 1) // stride + 1
    xp = np.pad(xd, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # im2col in (c, di, dj) order, then a single GEMM per layer
    cols = np.empty((c, 3, 3, n, ho, wo), dtype=xd.dtype)
    for di in range(3):
        for dj in range(3):
            xs = xp[
                :, :, di : di + (ho - 1) * stride + 1 : stride,
                dj : dj + (wo - 1) * stride + 1 : stride,
            ]
            cols[:, di, dj] = xs.transpose(1, 0, 2, 3)
    colmat = cols.reshape(c * 9, n * ho * wo)
    kmat = np.ascontiguousarray(kernels.data.reshape(k, c * 9))
    out = (kmat @ colmat).reshape(k, n, ho, wo).transpose(1, 0, 2, 3)

    def vjp(g):
        gmat = np.ascontiguousarray(
            g.reshape(n, k, ho, wo).transpose(1, 0, 2, 3)
        ).reshape(k, n * ho * wo)
        if kernels.requires_grad:
            kernels.accumulate((gmat @ colmat.T).reshape(kernels.data.shape))
        if x.requires_grad:
            dcols = (kmat.T @ gmat).reshape(c, 3, 3, n, ho, wo)
            dxp = np.zeros_like(xp)
            for di in range(3):
                for dj in range(3):
                    dxp[
                        :, :, di : di + (ho - 1) * stride + 1 : stride,
                        dj : dj + (wo - 1) * stride + 1 : stride,
                    ] += dcols[:, di, dj].transpose(1, 0, 2, 3)
            dx = dxp[:, :, 1:-1, 1:-1]
            x.accumulate(dx[0] if squeeze else dx)

    return make_node(np.ascontiguousarray(out[0] if squeeze else out), (x, kernels), vjp)


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = np.maximum(x.data, 0)

    def vjp(g):
        x.accumulate(g * (x.data > 0))

    return make_node(out, (x,), vjp)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def vjp(g):
        x.accumulate(g * (1 - out * out))

    return make_node(out, (x,), vjp)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # stable: exp of a non-positive argument only
    out = np.where(
        x.data >= 0,
        1 / (1 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1 + np.exp(-np.abs(x.data))),
    ).astype(x.data.dtype)

    def vjp(g):
        x.accumulate(g * out * (1 - out))

    return make_node(out, (x,), vjp)


def softmax(x) -> Tensor:
    """Softmax over the last axis; rows sum to 1."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        x.accumulate(out * (g - dot))

    return make_node(out, (x,), vjp)


def log_softmax(x) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse

    def vjp(g):
        p = np.exp(out)
        x.accumulate(g - p * g.sum(axis=-1, keepdims=True))

    return make_node(out, (x,), vjp)


def log(x) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        x.accumulate(g / x.data)

    return make_node(np.log(x.data), (x,), vjp)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def vjp(g):
        x.accumulate(g * out)

    return make_node(out, (x,), vjp)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only strictly inside the interval."""
    x = as_tensor(x)
    out = np.clip(x.data, lo, hi)

    def vjp(g):
        x.accumulate(g * ((x.data > lo) & (x.data < hi)))

    return make_node(out, (x,), vjp)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            x.accumulate(np.broadcast_to(g, x.data.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            x.accumulate(np.broadcast_to(g, x.data.shape).copy())

    return make_node(out, (x,), vjp)


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]
    s = tsum(x, axis=axis, keepdims=keepdims)
    return mul(s, 1.0 / count)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def vjp(g):
        x.accumulate(g.reshape(x.data.shape))

    return make_node(out, (x,), vjp)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate(piece)

    return make_node(out, tuple(tensors), vjp)


def narrow(x, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries from `start` along `axis`."""
    x = as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = x.data[idx]

    def vjp(g):
        buf = np.zeros_like(x.data)
        buf[idx] = g
        x.accumulate(buf)

    return make_node(out.copy(), (x,), vjp)


def take_along_last(x, indices: np.ndarray) -> Tensor:
    """Pick one entry per row of a 2-D tensor: out[i] = x[i, indices[i]]."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ConfigError(f"take_along_last expects a 2-D tensor, got {x.shape}")
    rows = np.arange(x.data.shape[0])
    idx = np.asarray(indices, dtype=np.int64)
    out = x.data[rows, idx]

    def vjp(g):
        buf = np.zeros_like(x.data)
        buf[rows, idx] = g
        x.accumulate(buf)

    return make_node(out, (x,), vjp)


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = as_tensor(logits)
    if logits.data.ndim != 2:
        raise ConfigError(f"cross_entropy expects (n,k) logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.data.shape[0]
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    out = np.asarray(-logp[np.arange(n), labels].mean(), dtype=logits.data.dtype)

    def vjp(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1
        logits.accumulate(p * (g / n))

    return make_node(out, (logits,), vjp)


def gaussian_kl(mu, log_sigma) -> Tensor:
    """Per-row KL( N(mu, sigma^2) || N(0, I) ) for diagonal Gaussians."""
    mu, log_sigma = as_tensor(mu), as_tensor(log_sigma)
    if mu.shape != log_sigma.shape:
        raise ConfigError(f"gaussian_kl shape mismatch: {mu.shape} vs {log_sigma.shape}")
    var = exp(mul(log_sigma, 2.0))
    inner = sub(sub(add(mul(mu, mu), var), 1.0), mul(log_sigma, 2.0))
    return mul(tsum(inner, axis=-1), 0.5)


def one_hot(indices: np.ndarray, k: int, dtype=np.float32) -> np.ndarray:
    """Plain numpy one-hot encoding (constant, not differentiable)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.zeros(idx.shape + (k,), dtype=dtype)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out
