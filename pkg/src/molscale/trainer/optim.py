"""AdamW with decoupled weight decay, and global-norm gradient clipping."""

import logging
import math
from collections.abc import Iterable

import numpy as np

from molscale.diffcore import Tensor
from molscale.errors import CheckpointIOError, NanGradientError

logger = logging.getLogger(__name__)


def clip_gradients(tensors: Iterable[Tensor], max_norm: float = 1.0) -> float:
    """Scale gradients so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    tensors = [t for t in tensors if t.grad is not None]
    norm = math.sqrt(sum(float(np.sum(np.square(t.grad, dtype=np.float64))) for t in tensors))
    if norm > max_norm:
        scale = max_norm / norm
        for tensor in tensors:
            tensor.grad = tensor.grad * np.asarray(scale, dtype=tensor.grad.dtype)
    return norm


def adamw_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.99),
    eps: float = 1e-8,
    weight_decay: float = 1e-4,
) -> None:
    """Update ``param``, ``m`` and ``v`` in place for step ``t`` (1-based)."""
    beta1, beta2 = betas
    param *= 1.0 - lr * weight_decay
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamW:
    """Moment buffers and step count for a set of named parameters."""

    def __init__(
        self,
        params: Iterable[tuple[str, Tensor]],
        betas: tuple[float, float] = (0.9, 0.99),
        eps: float = 1e-8,
        weight_decay: float = 1e-4,
    ):
        self.params = dict(params)
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self, lr: float) -> None:
        """Apply one update. A non-finite gradient aborts before anything changes."""
        for name, param in self.params.items():
            if param.grad is not None and not np.all(np.isfinite(param.grad)):
                raise NanGradientError(name)
        self.t += 1
        for name, param in self.params.items():
            grad = param.grad if param.grad is not None else np.zeros_like(param.data)
            adamw_step(
                param.data,
                grad.astype(param.data.dtype, copy=False),
                self.m[name],
                self.v[name],
                self.t,
                lr,
                self.betas,
                self.eps,
                self.weight_decay,
            )

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"opt.m.{name}": m for name, m in self.m.items()}
        arrays.update({f"opt.v.{name}": v for name, v in self.v.items()})
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray], t: int) -> None:
        for name, param in self.params.items():
            for prefix, buffers in (("opt.m.", self.m), ("opt.v.", self.v)):
                key = prefix + name
                if key not in arrays:
                    raise CheckpointIOError(
                        f"checkpoint has no optimizer state {key}; it cannot be resumed"
                    )
                buffers[name] = np.array(arrays[key], dtype=param.data.dtype).reshape(param.shape)
        self.t = int(t)
        logger.debug(f"Restored optimizer moments at step {self.t}")
