"""Central finite-difference verification of analytic gradients."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from molscale.diffcore import ops
from molscale.diffcore.tensor import Tensor, backward, default_dtype
from molscale.errors import ConfigError

logger = logging.getLogger(__name__)

LossFn = Callable[[], Tensor]
CaseFactory = Callable[[np.random.Generator, Callable[..., Tensor]], tuple[LossFn, list[Tensor]]]


@dataclass
class GradCheckResult:
    """Outcome of one gradient check."""

    name: str
    rel_error: float
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.rel_error < self.tolerance


def numerical_gradient(fn: LossFn, tensor: Tensor, index: tuple[int, ...], h: float = 1e-5) -> float:
    """Central difference of ``fn`` with respect to one entry of ``tensor``."""
    original = tensor.data[index].copy()
    tensor.data[index] = original + h
    plus = fn().item()
    tensor.data[index] = original - h
    minus = fn().item()
    tensor.data[index] = original
    return (plus - minus) / (2.0 * h)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(diff / scale)


def check_gradients(
    fn: LossFn,
    inputs: Sequence[Tensor],
    *,
    name: str = "",
    h: float = 1e-5,
    tolerance: float = 1e-4,
    samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckResult:
    """Compare backward() against central differences.

    With ``samples`` set, that many entries are drawn uniformly from the
    concatenation of all inputs; otherwise every entry is checked.
    """
    for tensor in inputs:
        tensor.zero_grad()
    backward(fn())

    sizes = np.array([t.data.size for t in inputs])
    ends = np.cumsum(sizes)
    total = int(ends[-1]) if len(ends) else 0
    if samples is None or samples >= total:
        flat = np.arange(total)
    else:
        rng = rng or np.random.default_rng(0)
        flat = np.sort(rng.choice(total, size=samples, replace=False))
    owners = np.searchsorted(ends, flat, side="right")
    coordinates = [
        (inputs[w], np.unravel_index(int(f - (ends[w] - sizes[w])), inputs[w].shape))
        for f, w in zip(flat, owners)
    ]

    analytic = np.array([0.0 if t.grad is None else float(t.grad[idx]) for t, idx in coordinates])
    numeric = np.array([numerical_gradient(fn, t, idx, h) for t, idx in coordinates])
    result = GradCheckResult(name, relative_error(analytic, numeric), len(coordinates), tolerance)
    log = logger.debug if result.passed else logger.warning
    log(f"gradcheck {name or 'fn'}: rel error {result.rel_error:.2e} over {result.checked} entries")
    return result


def _param(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _projected(out_fn: Callable[[], Tensor], rng: np.random.Generator, shape: tuple[int, ...]) -> LossFn:
    """Reduce a tensor-valued function to a scalar through fixed random weights."""
    weights = Tensor(rng.normal(size=shape))
    return lambda: ops.sum(ops.mul(out_fn(), weights))


def _case_add(rng, op):
    a, b = _param(rng, 3, 4), _param(rng, 4)
    return _projected(lambda: op(a, b), rng, (3, 4)), [a, b]


def _case_sub(rng, op):
    a, b = _param(rng, 3, 4), _param(rng, 3, 1)
    return _projected(lambda: op(a, b), rng, (3, 4)), [a, b]


def _case_mul(rng, op):
    a, b = _param(rng, 2, 3), _param(rng, 3)
    return _projected(lambda: op(a, b), rng, (2, 3)), [a, b]


def _case_matmul(rng, op):
    a, b = _param(rng, 3, 4), _param(rng, 4, 2)
    return _projected(lambda: op(a, b), rng, (3, 2)), [a, b]


def _case_batched_matmul(rng, op):
    a, b = _param(rng, 2, 3, 4), _param(rng, 2, 4, 5)
    return _projected(lambda: op(a, b), rng, (2, 3, 5)), [a, b]


def _case_transpose(rng, op):
    x = _param(rng, 2, 3, 4)
    return _projected(lambda: op(x, 0, 2), rng, (4, 3, 2)), [x]


def _case_reshape(rng, op):
    x = _param(rng, 2, 6)
    return _projected(lambda: op(x, (3, 4)), rng, (3, 4)), [x]


def _case_concat(rng, op):
    a, b = _param(rng, 2, 3), _param(rng, 2, 2)
    return _projected(lambda: op([a, b], axis=1), rng, (2, 5)), [a, b]


def _case_softmax(rng, op):
    x = _param(rng, 3, 5, low=-2.0, high=2.0)
    return _projected(lambda: op(x, axis=-1), rng, (3, 5)), [x]


def _case_layer_norm(rng, op):
    x, w, b = _param(rng, 3, 6), _param(rng, 6), _param(rng, 6)
    return _projected(lambda: op(x, w, b), rng, (3, 6)), [x, w, b]


def _case_gelu(rng, op):
    x = _param(rng, 4, 5, low=-3.0, high=3.0)
    return _projected(lambda: op(x), rng, (4, 5)), [x]


def _case_sigmoid(rng, op):
    x = _param(rng, 4, 5, low=-3.0, high=3.0)
    return _projected(lambda: op(x), rng, (4, 5)), [x]


def _case_embedding_lookup(rng, op):
    table = _param(rng, 6, 4)
    ids = np.array([[0, 2, 2], [5, 1, 0]])
    return _projected(lambda: op(table, ids), rng, (2, 3, 4)), [table]


def _case_cross_entropy(rng, op):
    logits = _param(rng, 4, 5, low=-2.0, high=2.0)
    targets = np.array([1, -100, 4, 0])
    return (lambda: op(logits, targets)), [logits]


def _case_l1_loss(rng, op):
    pred = _param(rng, 3, 3)
    # Keep every residual well away from the kink at zero.
    target = pred.data + rng.choice([-1.0, 1.0], size=(3, 3)) * rng.uniform(0.1, 1.0, size=(3, 3))
    mask = np.array([[1, 1, 0], [1, 0, 1], [1, 1, 1]])
    return (lambda: op(pred, target, mask)), [pred]


def _case_sum(rng, op):
    x = _param(rng, 3, 4)
    return _projected(lambda: op(x, axis=0), rng, (4,)), [x]


def _case_mean(rng, op):
    x = _param(rng, 3, 4)
    return _projected(lambda: op(x, axis=1, keepdims=True), rng, (3, 1)), [x]


def _case_einsum(rng, op):
    a, b = _param(rng, 2, 3, 4), _param(rng, 2, 3, 4)
    return _projected(lambda: op("bik,bjk->bij", a, b), rng, (2, 3, 3)), [a, b]


def _case_pairwise_distance(rng, op):
    coords = _param(rng, 4, 3, low=-2.0, high=2.0)
    return _projected(lambda: op(coords), rng, (4, 4)), [coords]


def _case_gaussian_density(rng, op):
    x = _param(rng, 3, 1, low=0.0, high=3.0)
    mean = _param(rng, 4, low=0.0, high=3.0)
    std = _param(rng, 4, low=0.5, high=1.5)
    return _projected(lambda: op(x, mean, std), rng, (3, 4)), [x, mean, std]


PRIMITIVE_CASES: dict[str, CaseFactory] = {
    "add": _case_add,
    "sub": _case_sub,
    "mul": _case_mul,
    "matmul": _case_matmul,
    "batched_matmul": _case_batched_matmul,
    "transpose": _case_transpose,
    "reshape": _case_reshape,
    "concat": _case_concat,
    "softmax": _case_softmax,
    "layer_norm": _case_layer_norm,
    "gelu": _case_gelu,
    "sigmoid": _case_sigmoid,
    "embedding_lookup": _case_embedding_lookup,
    "cross_entropy": _case_cross_entropy,
    "l1_loss": _case_l1_loss,
    "sum": _case_sum,
    "mean": _case_mean,
    "einsum": _case_einsum,
    "pairwise_distance": _case_pairwise_distance,
    "gaussian_density": _case_gaussian_density,
}


def corrupted(op: Callable[..., Tensor]) -> Callable[..., Tensor]:
    """Wrap ``op`` so its analytic gradients are wrong; exercises the failure path."""

    def wrapped(*args, **kwargs) -> Tensor:
        out = op(*args, **kwargs)
        inner = out._backward
        if inner is not None:
            out._backward = lambda g: [None if x is None else 1.5 * x + 0.1 for x in inner(g)]
        return out

    return wrapped


def run_primitive_checks(
    corrupt: Optional[str] = None, seed: int = 0, tolerance: float = 1e-4
) -> list[GradCheckResult]:
    """Gradient-check every registered primitive in 64-bit mode."""
    if corrupt is not None and corrupt not in ops.PRIMITIVES:
        raise ConfigError(f"unknown primitive '{corrupt}'")
    results = []
    with default_dtype(np.float64):
        for name, factory in PRIMITIVE_CASES.items():
            op = ops.PRIMITIVES[name]
            if name == corrupt:
                op = corrupted(op)
            rng = np.random.default_rng([seed, len(results)])
            fn, inputs = factory(rng, op)
            results.append(check_gradients(fn, inputs, name=name, tolerance=tolerance))
    failed = [r.name for r in results if not r.passed]
    logger.info(f"Primitive gradient checks: {len(results) - len(failed)}/{len(results)} passed")
    return results
