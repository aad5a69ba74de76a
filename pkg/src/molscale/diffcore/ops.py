"""Differentiable primitives.

Each primitive computes its forward value with numpy and registers a closure that
returns exact analytic gradients for its tensor inputs. Shape errors raise
ShapeMismatchError naming both shapes.
"""

import math
from collections.abc import Callable, Sequence
from typing import Optional

import numpy as np
from scipy.special import erf, expit

from molscale.diffcore.tensor import Tensor, TensorLike, as_tensor
from molscale.errors import RangeError, ShapeMismatchError

SQRT_2PI = math.sqrt(2.0 * math.pi)
STD_FLOOR = 1e-5


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def _normalize_axis(axis: int, ndim: int) -> int:
    return axis + ndim if axis < 0 else axis


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def _backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), _backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def _backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), _backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def _backward(g: np.ndarray):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._from_op(a.data * b.data, (a, b), _backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeMismatchError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def _backward(g: np.ndarray):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return Tensor._from_op(out, (a, b), _backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight + bias`` over the last axis."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(_normalize_axis(a, x.ndim) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeMismatchError(f"permute: axes {axes} do not match shape {x.shape}")
    inverse = tuple(np.argsort(axes))

    def _backward(g: np.ndarray):
        return (np.transpose(g, inverse),)

    return Tensor._from_op(np.transpose(x.data, axes), (x,), _backward)


def transpose(x: Tensor, axis1: int = -2, axis2: int = -1) -> Tensor:
    axes = list(range(x.ndim))
    i, j = _normalize_axis(axis1, x.ndim), _normalize_axis(axis2, x.ndim)
    axes[i], axes[j] = axes[j], axes[i]
    return permute(x, axes)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeMismatchError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None

    def _backward(g: np.ndarray):
        return (g.reshape(x.shape),)

    return Tensor._from_op(out, (x,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeMismatchError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(out, tensors, _backward)


def sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return Tensor._from_op(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), _backward)


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]

    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape),)

    return Tensor._from_op(np.mean(x.data, axis=axis, keepdims=keepdims), (x,), _backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def _backward(g: np.ndarray):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (x,), _backward)


def layer_norm(
    x: Tensor,
    weight: Optional[Tensor] = None,
    bias: Optional[Tensor] = None,
    eps: float = 1e-5,
    axis: int = -1,
) -> Tensor:
    """Normalise over ``axis`` to zero mean and unit variance, then apply the affine map."""
    if weight is not None and (axis not in (-1, x.ndim - 1) or weight.shape != (x.shape[-1],)):
        raise ShapeMismatchError(f"layer_norm: weight shape {weight.shape} for input {x.shape}")
    centred = x.data - np.mean(x.data, axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(np.mean(centred * centred, axis=axis, keepdims=True) + eps)
    x_hat = centred * inv_std
    out = x_hat
    if weight is not None:
        out = out * weight.data
    if bias is not None:
        out = out + bias.data

    parents = [x] + [t for t in (weight, bias) if t is not None]

    def _backward(g: np.ndarray):
        g_hat = g * weight.data if weight is not None else g
        gx = inv_std * (
            g_hat
            - np.mean(g_hat, axis=axis, keepdims=True)
            - x_hat * np.mean(g_hat * x_hat, axis=axis, keepdims=True)
        )
        grads = [gx]
        if weight is not None:
            grads.append(_unbroadcast(g * x_hat, weight.shape))
        if bias is not None:
            grads.append(_unbroadcast(g, bias.shape))
        return grads

    return Tensor._from_op(out, parents, _backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))

    def _backward(g: np.ndarray):
        pdf = np.exp(-0.5 * x.data * x.data) / SQRT_2PI
        return (g * (cdf + x.data * pdf),)

    return Tensor._from_op(x.data * cdf, (x,), _backward)


def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)

    def _backward(g: np.ndarray):
        return (g * y * (1.0 - y),)

    return Tensor._from_op(y, (x,), _backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Rows of ``table`` gathered by integer ``ids``; output shape ids.shape + (dim,)."""
    ids = np.asarray(ids, dtype=np.int64)
    rows = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= rows):
        bad = int(ids[(ids < 0) | (ids >= rows)].flat[0])
        raise RangeError(f"embedding id {bad} outside table of {rows} rows")

    def _backward(g: np.ndarray):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return Tensor._from_op(table.data[ids], (table,), _backward)


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_index: int = -100) -> Tensor:
    """Mean negative log-likelihood over targets that are not ``ignore_index``."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeMismatchError(f"cross_entropy: logits {logits.shape} and targets {targets.shape}")
    classes = logits.shape[-1]
    flat_logits = logits.data.reshape(-1, classes)
    flat_targets = targets.reshape(-1)
    valid = flat_targets != ignore_index
    count = int(valid.sum())
    if count == 0:
        raise ValueError("cross_entropy: every target is ignored")
    if np.any((flat_targets[valid] < 0) | (flat_targets[valid] >= classes)):
        raise RangeError(f"cross_entropy: target outside [0, {classes})")

    safe_targets = np.where(valid, flat_targets, 0)
    rows = np.arange(flat_targets.size)
    shifted = flat_logits - flat_logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    nll = log_norm - shifted[rows, safe_targets]
    loss = np.sum(nll * valid) / count

    def _backward(g: np.ndarray):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, safe_targets] -= 1.0
        probs *= (valid / count)[:, None]
        return ((probs * g).reshape(logits.shape),)

    return Tensor._from_op(np.asarray(loss, dtype=logits.dtype), (logits,), _backward)


def l1_loss(pred: Tensor, target: TensorLike, mask: Optional[np.ndarray] = None) -> Tensor:
    """Mean absolute error over the entries where ``mask`` is non-zero."""
    target_data = target.data if isinstance(target, Tensor) else np.asarray(target)
    if target_data.shape != pred.shape:
        raise ShapeMismatchError(f"l1_loss: prediction {pred.shape} and target {target_data.shape}")
    weights = (
        np.ones(pred.shape, dtype=pred.dtype)
        if mask is None
        else np.broadcast_to(np.asarray(mask, dtype=pred.dtype), pred.shape)
    )
    count = float(weights.sum())
    if count == 0:
        raise ValueError("l1_loss: mask selects no entries")
    diff = pred.data - target_data

    def _backward(g: np.ndarray):
        return (g * np.sign(diff) * weights / count,)

    loss = np.sum(np.abs(diff) * weights) / count
    return Tensor._from_op(np.asarray(loss, dtype=pred.dtype), (pred,), _backward)


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum, e.g. ``"bikc,bjkc->bijc"``.

    Every index of an operand must appear in the output or in the other operand.
    """
    a, b = as_tensor(a), as_tensor(b)
    inputs, _, output = subscripts.replace(" ", "").partition("->")
    sub_a, _, sub_b = inputs.partition(",")
    if not output or not sub_a or not sub_b:
        raise ValueError(f"einsum: need explicit 'x,y->z' subscripts, got {subscripts!r}")
    for own, other in ((sub_a, sub_b), (sub_b, sub_a)):
        if len(set(own)) != len(own):
            raise ValueError(f"einsum: repeated index within operand {own!r}")
        orphan = set(own) - set(output) - set(other)
        if orphan:
            raise ValueError(f"einsum: index {sorted(orphan)} of {own!r} is summed within one operand")
    try:
        out = np.einsum(f"{sub_a},{sub_b}->{output}", a.data, b.data, optimize=True)
    except ValueError:
        raise ShapeMismatchError(f"einsum {subscripts}: incompatible shapes {a.shape} and {b.shape}") from None

    def _backward(g: np.ndarray):
        ga = gb = None
        if a.requires_grad:
            ga = np.einsum(f"{output},{sub_b}->{sub_a}", g, b.data, optimize=True)
        if b.requires_grad:
            gb = np.einsum(f"{output},{sub_a}->{sub_b}", g, a.data, optimize=True)
        return ga, gb

    return Tensor._from_op(out, (a, b), _backward)


def pairwise_distance(coords: Tensor) -> Tensor:
    """Euclidean distances ``[..., n, 3] -> [..., n, n]``; coincident points get zero gradient."""
    if coords.ndim < 2 or coords.shape[-1] != 3:
        raise ShapeMismatchError(f"pairwise_distance: expected [..., n, 3], got {coords.shape}")
    diff = coords.data[..., :, None, :] - coords.data[..., None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))

    def _backward(g: np.ndarray):
        positive = dist > 0
        weights = np.where(positive, g / np.where(positive, dist, 1.0), 0.0)
        term = weights[..., None] * diff
        return (term.sum(axis=-2) - term.sum(axis=-3),)

    return Tensor._from_op(dist, (coords,), _backward)


def gaussian_density(x: Tensor, mean: Tensor, std: Tensor) -> Tensor:
    """Normal density of ``x`` under learnable means and scales (|std| + 1e-5), broadcast."""
    x, mean, std = as_tensor(x), as_tensor(mean), as_tensor(std)
    _check_broadcast("gaussian_density", x, mean)
    _check_broadcast("gaussian_density", mean, std)
    scale = np.abs(std.data) + STD_FLOOR
    z = (x.data - mean.data) / scale
    out = np.exp(-0.5 * z * z) / (SQRT_2PI * scale)

    def _backward(g: np.ndarray):
        gx = _unbroadcast(-g * out * z / scale, x.shape) if x.requires_grad else None
        gm = _unbroadcast(g * out * z / scale, mean.shape) if mean.requires_grad else None
        gs = None
        if std.requires_grad:
            gs = _unbroadcast(g * out * (z * z - 1.0) / scale * np.sign(std.data), std.shape)
        return gx, gm, gs

    return Tensor._from_op(out, (x, mean, std), _backward)


PRIMITIVES: dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "matmul": matmul,
    "batched_matmul": matmul,
    "transpose": transpose,
    "reshape": reshape,
    "concat": concat,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "gelu": gelu,
    "sigmoid": sigmoid,
    "embedding_lookup": embedding_lookup,
    "cross_entropy": cross_entropy,
    "l1_loss": l1_loss,
    "sum": sum,
    "mean": mean,
    "einsum": einsum,
    "pairwise_distance": pairwise_distance,
    "gaussian_density": gaussian_density,
}
