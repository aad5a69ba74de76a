"""Dense tensors with a reverse-mode gradient tape.

Every differentiable operation returns a new :class:`Tensor` that remembers its
parents and a closure mapping the output gradient to parent gradients.
:func:`backward` walks that graph in reverse topological order. Leaf gradients
accumulate additively into ``Tensor.grad`` until explicitly zeroed.

Double-backward is not supported: gradient closures work on raw arrays.
"""

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Any, Optional, Union

import numpy as np

from molscale.errors import NotScalarError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_default_dtype: type = np.float32
_grad_enabled = True


def get_default_dtype() -> type:
    return _default_dtype


@contextmanager
def default_dtype(dtype: type) -> Iterator[None]:
    """Temporarily change the dtype of newly created tensors (64-bit for gradient checks)."""
    global _default_dtype
    previous = _default_dtype
    _default_dtype = dtype
    try:
        yield
    finally:
        _default_dtype = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording the tape."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense row-major array with an optional gradient buffer."""

    __array_priority__ = 1000

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        *,
        dtype: Optional[type] = None,
        name: Optional[str] = None,
    ):
        self.data = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def _from_op(
        cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn
    ) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # Operators delegate to the primitive implementations in ops.
    def __add__(self, other: "TensorLike") -> "Tensor":
        from molscale.diffcore.ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "TensorLike") -> "Tensor":
        from molscale.diffcore.ops import sub

        return sub(self, other)

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        from molscale.diffcore.ops import sub

        return sub(other, self)

    def __mul__(self, other: "TensorLike") -> "Tensor":
        from molscale.diffcore.ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from molscale.diffcore.ops import mul

        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from molscale.diffcore.ops import matmul

        return matmul(self, other)


TensorLike = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: TensorLike) -> Tensor:
    """Wrap constants as non-differentiable tensors of the default dtype."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _topological_order(root: Tensor) -> list[Tensor]:
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


def backward(loss: Tensor) -> None:
    """Populate ``grad`` of every reachable leaf that requires gradients.

    Gradients add onto existing buffers; leaves not reachable from ``loss`` are
    left untouched.
    """
    if loss.data.size != 1:
        raise NotScalarError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node.is_leaf:
            grad = grad.astype(node.data.dtype, copy=False)
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + parent_grad if key in grads else parent_grad
