"""Minimal reverse-mode differentiable computation layer on numpy arrays.

Dense and 3x3-conv layers, the usual activations and losses, and a
bias-corrected Adam optimizer with per-group freezing. Deterministic,
single-threaded kernels; float32 for training, float64 for gradient checks.
"""

from .tensor import Tensor, no_grad, as_tensor, parameter, is_grad_enabled
from .ops import (
    add,
    sub,
    mul,
    neg,
    matmul,
    dense,
    conv2d,
    relu,
    tanh,
    sigmoid,
    softmax,
    log_softmax,
    log,
    exp,
    clip,
    tsum,
    tmean,
    reshape,
    concat,
    narrow,
    take_along_last,
    cross_entropy,
    gaussian_kl,
    one_hot,
)
from .optim import Adam, ParamSet
from .checkpoint import save_params, load_params, PARAM_MAGIC

__all__ = [
    "Tensor",
    "no_grad",
    "as_tensor",
    "parameter",
    "is_grad_enabled",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "dense",
    "conv2d",
    "relu",
    "tanh",
    "sigmoid",
    "softmax",
    "log_softmax",
    "log",
    "exp",
    "clip",
    "tsum",
    "tmean",
    "reshape",
    "concat",
    "narrow",
    "take_along_last",
    "cross_entropy",
    "gaussian_kl",
    "one_hot",
    "Adam",
    "ParamSet",
    "save_params",
    "load_params",
    "PARAM_MAGIC",
]
