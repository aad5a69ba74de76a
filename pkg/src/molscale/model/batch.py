"""Padding a list of noised samples into dense batch arrays."""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from molscale.errors import MoleculeTooLargeError
from molscale.model.noising import IGNORE_INDEX, NoisedSample
from molscale.molgraph.models import ATOMIC_FEATURE_VOCAB, BOND_FEATURE_VOCAB, PAD_TOKEN, TOKEN_VOCAB


@dataclass(eq=False)
class Batch:
    """Dense ``[B, N, ...]`` arrays for B molecules padded to N atoms."""

    mol_ids: list[str]
    lengths: np.ndarray
    tokens: np.ndarray
    degree: np.ndarray
    atomic: dict[str, np.ndarray]
    bonds: dict[str, np.ndarray]
    spd: np.ndarray
    atomic_masked: np.ndarray
    bond_masked: np.ndarray
    spd_masked: np.ndarray
    noised_coords: np.ndarray
    coords: np.ndarray
    distances: np.ndarray
    atom_targets: np.ndarray
    atom_mask: np.ndarray

    @property
    def size(self) -> int:
        return len(self.mol_ids)

    @property
    def max_atoms(self) -> int:
        return int(self.tokens.shape[1])

    @property
    def pair_mask(self) -> np.ndarray:
        """``[B, N, N]`` true where both atoms are real."""
        return self.atom_mask[:, :, None] & self.atom_mask[:, None, :]

    @property
    def distance_mask(self) -> np.ndarray:
        """Valid off-diagonal pairs."""
        return self.pair_mask & ~np.eye(self.max_atoms, dtype=bool)[None]

    def key_bias(self, dtype: type) -> np.ndarray:
        """``[B, 1, 1, N]`` additive attention bias, minus infinity on padding keys."""
        bias = np.where(self.atom_mask, 0.0, -np.inf).astype(dtype)
        return bias[:, None, None, :]

    def pair_types(self, buckets: int) -> np.ndarray:
        """Ordered token pair of each atom pair, hashed into ``buckets`` rows."""
        return (self.tokens[:, :, None] * TOKEN_VOCAB + self.tokens[:, None, :]) % buckets


def collate(
    samples: Sequence[NoisedSample], max_atoms: Optional[int] = None, pad_to: Optional[int] = None
) -> Batch:
    if not samples:
        raise ValueError("cannot collate an empty batch")
    lengths = np.array([s.n for s in samples], dtype=np.int64)
    longest = int(lengths.max())
    if max_atoms is not None and longest > max_atoms:
        big = samples[int(lengths.argmax())]
        raise MoleculeTooLargeError(f"molecule {big.mol_id} has {big.n} atoms, limit is {max_atoms}")
    size, width = len(samples), max(longest, pad_to or 0)

    def atoms(fill: int) -> np.ndarray:
        return np.full((size, width), fill, dtype=np.int64)

    def pairs(fill: int) -> np.ndarray:
        return np.full((size, width, width), fill, dtype=np.int64)

    tokens, degree, targets = atoms(PAD_TOKEN), atoms(0), atoms(IGNORE_INDEX)
    atomic = {name: atoms(0) for name in ATOMIC_FEATURE_VOCAB}
    bonds = {name: pairs(0) for name in BOND_FEATURE_VOCAB}
    spd = pairs(0)
    noised = np.zeros((size, width, 3))
    coords = np.zeros((size, width, 3))
    distances = np.zeros((size, width, width))
    atom_mask = np.zeros((size, width), dtype=bool)

    for b, sample in enumerate(samples):
        n, graph = sample.n, sample.graph
        tokens[b, :n] = sample.masked_tokens
        degree[b, :n] = graph.degree
        targets[b, :n] = sample.atom_targets
        for name in ATOMIC_FEATURE_VOCAB:
            atomic[name][b, :n] = getattr(graph, name)
        for name in BOND_FEATURE_VOCAB:
            bonds[name][b, :n, :n] = getattr(graph, name)
        spd[b, :n, :n] = sample.spd
        noised[b, :n] = sample.noised_coords
        coords[b, :n] = sample.coords
        distances[b, :n, :n] = sample.distances
        atom_mask[b, :n] = True

    return Batch(
        mol_ids=[s.mol_id for s in samples],
        lengths=lengths,
        tokens=tokens,
        degree=degree,
        atomic=atomic,
        bonds=bonds,
        spd=spd,
        atomic_masked=np.array([s.atomic_masked for s in samples]),
        bond_masked=np.array([s.bond_masked for s in samples]),
        spd_masked=np.array([s.spd_masked for s in samples]),
        noised_coords=noised,
        coords=coords,
        distances=distances,
        atom_targets=targets,
        atom_mask=atom_mask,
    )
