"""Tensor with a recorded-tape backward pass.

Each op stores a vector-Jacobian closure on its output node; backward walks
the graph in reverse topological order and accumulates into `.grad`. Graph
recording is skipped entirely inside `no_grad()` or when no input requires
gradients, so inference pays only the numpy cost.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import UsageError

_GRAD_ENABLED = True


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph recording within the context."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _coerce(data) -> np.ndarray:
    arr = np.asarray(data)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    """A numpy array with an optional gradient slot and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _coerce(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Same values, cut off from the tape."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            # copy: vjps may hand over views or shared buffers
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
            if self.grad.shape != self.data.shape:
                self.grad = np.broadcast_to(self.grad, self.data.shape).copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate `.grad` on every node reachable from this scalar loss.

        Idempotent after `zero_grad`: the tape is kept, so re-running
        reproduces identical gradients.
        """
        if self.data.size != 1:
            raise UsageError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        order = _toposort(self)
        for node in order:
            if node._vjp is not None:  # interior grads are scratch, not state
                node.grad = None
        self.accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._vjp is not None and node.grad is not None:
                node._vjp(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # light operator sugar; the full op set lives in ops.py
    def __add__(self, other):
        from .ops import add

        return add(self, other)

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    def __neg__(self):
        from .ops import neg

        return neg(self)

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)


def _toposort(root: Tensor) -> list[Tensor]:
    """Deterministic iterative DFS post-order over the tape."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value, dtype=None) -> Tensor:
    """Wrap a value as a constant (non-differentiable) Tensor."""
    if isinstance(value, Tensor):
        return value
    arr = _coerce(value)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return Tensor(arr)


def parameter(data) -> Tensor:
    """A leaf tensor that participates in optimization."""
    return Tensor(np.array(data), requires_grad=True)


def make_node(
    data: np.ndarray, parents: tuple[Tensor, ...], vjp
) -> Tensor:
    """Internal: build an op output, recording the tape when enabled."""
    requires = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data)
    if requires:
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out
