"""Parameter grouping and the Adam optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .tensor import Tensor


class ParamSet:
    """Named, ordered parameter group with a shared frozen flag.

    Frozen groups are excluded from optimization entirely: their bytes are
    invariant across any number of optimizer steps, and their tensors stop
    requesting gradients.
    """

    def __init__(self, name: str, frozen: bool = False):
        self.name = name
        self.frozen = frozen
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise UsageError(f"duplicate parameter {name!r} in group {self.name!r}")
        tensor.requires_grad = not self.frozen
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def freeze(self) -> None:
        self.frozen = True
        for t in self._params.values():
            t.requires_grad = False

    def unfreeze(self) -> None:
        self.frozen = False
        for t in self._params.values():
            t.requires_grad = True

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {f"{self.name}/{k}": v.data for k, v in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self._params.items():
            key = f"{self.name}/{k}"
            if key not in arrays:
                raise UsageError(f"checkpoint is missing parameter {key!r}")
            src = arrays[key]
            if src.shape != t.data.shape:
                raise UsageError(
                    f"checkpoint shape mismatch for {key!r}: "
                    f"{src.shape} vs {t.data.shape}"
                )
            t.data = src.astype(t.data.dtype, copy=True)

    def byte_digest(self) -> bytes:
        """Concatenated raw bytes, for freeze-invariance checks."""
        return b"".join(t.data.tobytes() for t in self._params.values())


class Adam:
    """Bias-corrected Adam over a list of ParamSets; frozen groups skipped."""

    def __init__(
        self,
        param_sets: list[ParamSet],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.param_sets = list(param_sets)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def _live_tensors(self):
        for ps in self.param_sets:
            if ps.frozen:
                continue
            for name, tensor in ps.items():
                yield f"{ps.name}/{name}", tensor

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, p in self._live_tensors():
            if p.grad is None:
                raise UsageError(f"adam step with no gradient for {name!r}")
            key = id(p)
            if key not in self._m:
                self._m[key] = np.zeros_like(p.data)
                self._v[key] = np.zeros_like(p.data)
            m, v = self._m[key], self._v[key]
            g = p.grad
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * (g * g)
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def zero_grad(self) -> None:
        for ps in self.param_sets:
            ps.zero_grad()
