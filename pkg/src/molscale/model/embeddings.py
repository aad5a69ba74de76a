"""Initial atom and pair representations."""

import numpy as np

from molscale.diffcore import Tensor, add, embedding_lookup, gaussian_density, linear, mul
from molscale.model.batch import Batch
from molscale.model.params import ModelState
from molscale.molgraph.graph import pair_distances
from molscale.molgraph.models import ATOMIC_FEATURE_VOCAB, BOND_FEATURE_VOCAB


def _masked_group(group: Tensor, mask_vector: Tensor, masked: np.ndarray) -> Tensor:
    """Swap a feature group's embedding for its learned mask vector, per molecule."""
    if not masked.any():
        return group
    keep_shape = (-1,) + (1,) * (group.ndim - 1)
    keep = Tensor((~masked).astype(group.dtype).reshape(keep_shape), dtype=group.dtype.type)
    drop = Tensor(masked.astype(group.dtype).reshape(keep_shape), dtype=group.dtype.type)
    return add(mul(group, keep), mul(mask_vector, drop))


def embed_atoms(state: ModelState, batch: Batch) -> Tensor:
    """x0 = Emb(token) + Emb(degree) + Emb(atomic) with ``[B, N, d]`` output."""
    embed = state.scope("embed")
    x = add(embedding_lookup(embed["token"], batch.tokens), embedding_lookup(embed["degree"], batch.degree))
    atomic = None
    for name in ATOMIC_FEATURE_VOCAB:
        part = embedding_lookup(embed[f"atomic.{name}"], batch.atomic[name])
        atomic = part if atomic is None else add(atomic, part)
    return add(x, _masked_group(atomic, embed["atomic_mask"], batch.atomic_masked))


def gaussian_features(state: ModelState, batch: Batch) -> Tensor:
    """Responses of the K Gaussian kernels to each pair's noised distance, ``[B, N, N, K]``."""
    gaussian = state.scope("embed.gaussian")
    dtype = state.dtype.type
    dist = Tensor(pair_distances(batch.noised_coords)[..., None], dtype=dtype)
    types = batch.pair_types(state.config.pair_type_buckets)
    scaled = add(
        mul(embedding_lookup(gaussian["mul"], types), dist),
        embedding_lookup(gaussian["bias"], types),
    )
    return gaussian_density(scaled, gaussian["mean"], gaussian["std"])


def embed_pairs(state: ModelState, batch: Batch) -> Tensor:
    """p0 = Emb(bond) + Emb(SPD) + psi(distance) with ``[B, N, N, d_p]`` output."""
    embed = state.scope("embed")
    bond = None
    for name in BOND_FEATURE_VOCAB:
        part = embedding_lookup(embed[f"bond.{name}"], batch.bonds[name])
        bond = part if bond is None else add(bond, part)
    bond = _masked_group(bond, embed["bond_mask"], batch.bond_masked)
    spd = _masked_group(embedding_lookup(embed["spd"], batch.spd), embed["spd_mask"], batch.spd_masked)
    psi = linear(gaussian_features(state, batch), embed["gaussian.proj.weight"], embed["gaussian.proj.bias"])
    return add(add(bond, spd), psi)
