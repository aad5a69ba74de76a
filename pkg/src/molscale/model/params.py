"""Named parameters of the two-track network.

Every learnable array has a dotted name. ``parameter_shapes`` enumerates them
without allocating so even the largest presets can be counted.
"""

import logging
import math
from collections.abc import Iterator
from typing import Optional

import numpy as np

from molscale.diffcore import Tensor, get_default_dtype
from molscale.errors import ShapeMismatchError
from molscale.model.config import ModelConfig
from molscale.molgraph.models import (
    ATOM_TOKEN_VOCAB,
    ATOMIC_FEATURE_VOCAB,
    BOND_FEATURE_VOCAB,
    DEGREE_VOCAB,
    TOKEN_VOCAB,
)

logger = logging.getLogger(__name__)

Shape = tuple[int, ...]

TRIANGLE_PROJECTIONS = (
    "out_left_gate",
    "out_left",
    "out_right_gate",
    "out_right",
    "in_left_gate",
    "in_left",
    "in_right_gate",
    "in_right",
)


def _linear(prefix: str, fan_in: int, fan_out: int, bias: bool = True) -> dict[str, Shape]:
    shapes = {f"{prefix}.weight": (fan_in, fan_out)}
    if bias:
        shapes[f"{prefix}.bias"] = (fan_out,)
    return shapes


def _norm(prefix: str, dim: int) -> dict[str, Shape]:
    return {f"{prefix}.weight": (dim,), f"{prefix}.bias": (dim,)}


def _embedding_shapes(cfg: ModelConfig) -> dict[str, Shape]:
    d, dp, k = cfg.embed_dim, cfg.pair_dim, cfg.gaussian_kernels
    shapes: dict[str, Shape] = {
        "embed.token": (TOKEN_VOCAB, d),
        "embed.degree": (DEGREE_VOCAB, d),
    }
    for field, vocab in ATOMIC_FEATURE_VOCAB.items():
        shapes[f"embed.atomic.{field}"] = (vocab, d)
    shapes["embed.atomic_mask"] = (d,)
    for field, vocab in BOND_FEATURE_VOCAB.items():
        shapes[f"embed.bond.{field}"] = (vocab, dp)
    shapes["embed.bond_mask"] = (dp,)
    shapes["embed.spd"] = (cfg.spd_vocab, dp)
    shapes["embed.spd_mask"] = (dp,)
    shapes["embed.gaussian.mean"] = (k,)
    shapes["embed.gaussian.std"] = (k,)
    shapes["embed.gaussian.mul"] = (cfg.pair_type_buckets, 1)
    shapes["embed.gaussian.bias"] = (cfg.pair_type_buckets, 1)
    shapes.update(_linear("embed.gaussian.proj", k, dp))
    return shapes


def _block_shapes(cfg: ModelConfig, prefix: str) -> dict[str, Shape]:
    d, dp, dt, f, h = cfg.embed_dim, cfg.pair_dim, cfg.pair_hidden, cfg.ffn_dim, cfg.heads
    shapes: dict[str, Shape] = {}
    # atom track
    shapes.update(_norm(f"{prefix}.attn_norm", d))
    for name in ("q", "k", "v", "out"):
        shapes.update(_linear(f"{prefix}.attn.{name}", d, d))
    shapes.update(_linear(f"{prefix}.attn.pair_bias", dp, h))
    shapes.update(_norm(f"{prefix}.ffn_norm", d))
    shapes.update(_linear(f"{prefix}.ffn.fc1", d, f))
    shapes.update(_linear(f"{prefix}.ffn.fc2", f, d))
    # pair track
    shapes.update(_norm(f"{prefix}.outer.norm", d))
    shapes.update(_linear(f"{prefix}.outer.left", d, dt))
    shapes.update(_linear(f"{prefix}.outer.right", d, dt))
    shapes[f"{prefix}.outer.proj.weight"] = (dt, dt, dp)
    shapes[f"{prefix}.outer.proj.bias"] = (dp,)
    shapes.update(_norm(f"{prefix}.tri.norm", dp))
    for name in TRIANGLE_PROJECTIONS:
        shapes.update(_linear(f"{prefix}.tri.{name}", dp, dt))
    shapes.update(_norm(f"{prefix}.tri.out_norm", dt))
    shapes.update(_linear(f"{prefix}.tri.gate", dp, dp))
    shapes.update(_linear(f"{prefix}.tri.proj", dt, dp))
    shapes.update(_norm(f"{prefix}.pair_ffn_norm", dp))
    shapes.update(_linear(f"{prefix}.pair_ffn.fc1", dp, dp))
    shapes.update(_linear(f"{prefix}.pair_ffn.fc2", dp, dp))
    return shapes


def _head_shapes(cfg: ModelConfig) -> dict[str, Shape]:
    d, dp, dt, h = cfg.embed_dim, cfg.pair_dim, cfg.pair_hidden, cfg.heads
    shapes: dict[str, Shape] = {}
    shapes.update(_norm("lm_head.input_norm", d))
    shapes.update(_linear("lm_head.dense", d, d))
    shapes.update(_norm("lm_head.norm", d))
    shapes.update(_linear("lm_head.out", d, ATOM_TOKEN_VOCAB))
    shapes.update(_norm("pos_head.atom_norm", d))
    shapes.update(_norm("pos_head.pair_norm", dp))
    for name in ("q", "k", "v"):
        shapes.update(_linear(f"pos_head.{name}", d, d))
    shapes.update(_linear("pos_head.pair_bias", dp, h))
    # No biases: a zero context must give a zero displacement.
    shapes.update(_linear("pos_head.ffn.fc1", d, dt, bias=False))
    shapes.update(_linear("pos_head.ffn.fc2", dt, 1, bias=False))
    return shapes


def parameter_shapes(cfg: ModelConfig) -> dict[str, Shape]:
    """Every parameter name mapped to its shape, in a fixed order."""
    shapes = _embedding_shapes(cfg)
    for layer in range(cfg.layers):
        shapes.update(_block_shapes(cfg, f"blocks.{layer}"))
    shapes.update(_head_shapes(cfg))
    return shapes


def count_parameters(cfg: ModelConfig) -> int:
    return sum(math.prod(shape) for shape in parameter_shapes(cfg).values())


def _initial_value(name: str, shape: Shape, rng: np.random.Generator) -> np.ndarray:
    *_, owner, leaf = ("", *name.split("."))
    if owner.endswith("norm"):
        return np.ones(shape) if leaf == "weight" else np.zeros(shape)
    if name == "embed.gaussian.mean":
        return rng.uniform(0.0, 3.0, size=shape)
    if name == "embed.gaussian.std":
        return rng.uniform(0.5, 3.0, size=shape)
    if name == "embed.gaussian.mul":
        return np.ones(shape)
    if leaf == "bias":
        return np.zeros(shape)
    if name.startswith("embed."):
        return rng.normal(0.0, 0.02 if len(shape) == 1 else 1.0, size=shape)
    fan_in = math.prod(shape[:-1])
    return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)


class ParameterScope:
    """Read access to parameters under a dotted prefix, e.g. ``blocks.0``."""

    def __init__(self, state: "ModelState", prefix: str):
        self._state = state
        self._prefix = prefix

    def __getitem__(self, name: str) -> Tensor:
        return self._state[f"{self._prefix}.{name}"]

    def get(self, name: str) -> Optional[Tensor]:
        return self._state.params.get(f"{self._prefix}.{name}")

    def scope(self, name: str) -> "ParameterScope":
        return ParameterScope(self._state, f"{self._prefix}.{name}")


class ModelState:
    """The network's named parameters and the config that shaped them."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        expected = parameter_shapes(config)
        if set(params) != set(expected):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise ShapeMismatchError(
                f"parameter names disagree with config (missing {missing[:3]}, extra {extra[:3]})"
            )
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeMismatchError(
                    f"parameter {name} has shape {params[name].shape}, config expects {shape}"
                )
        self.config = config
        self.params = {name: params[name] for name in expected}

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __iter__(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self.params.items())

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def scope(self, prefix: str) -> ParameterScope:
        return ParameterScope(self, prefix)

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    @property
    def size(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def astype(self, dtype: type) -> "ModelState":
        """A detached copy with every parameter cast to ``dtype``."""
        params = {
            name: Tensor(t.data.astype(dtype), requires_grad=True, dtype=dtype, name=name)
            for name, t in self.params.items()
        }
        return ModelState(self.config, params)

    def copy(self) -> "ModelState":
        return self.astype(self.dtype.type)


def init_state(cfg: ModelConfig, seed: int = 0, dtype: Optional[type] = None) -> ModelState:
    """Randomly initialise every parameter from ``seed``."""
    dtype = dtype or get_default_dtype()
    rng = np.random.default_rng(seed)
    params = {
        name: Tensor(_initial_value(name, shape, rng), requires_grad=True, dtype=dtype, name=name)
        for name, shape in parameter_shapes(cfg).items()
    }
    state = ModelState(cfg, params)
    logger.info(f"Initialised {cfg.name} model: {state.size:,} parameters")
    return state
