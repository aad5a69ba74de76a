"""Masking and coordinate noising for the two pretraining objectives."""

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from molscale.molgraph import MASK_TOKEN, MolecularGraph, compute_spd, kabsch_align, pair_distances

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100


@dataclass(frozen=True, eq=False)
class NoisedSample:
    """A molecule prepared for one training step.

    ``atom_targets`` holds the true token at masked positions and
    ``IGNORE_INDEX`` elsewhere. ``coords`` and ``distances`` are the clean
    targets; ``noised_coords`` sit in the same frame after alignment.
    """

    graph: MolecularGraph
    spd: np.ndarray
    masked_tokens: np.ndarray
    atom_targets: np.ndarray
    atomic_masked: bool
    bond_masked: bool
    spd_masked: bool
    noised_coords: np.ndarray
    coords: np.ndarray
    distances: np.ndarray

    @property
    def mol_id(self) -> str:
        return self.graph.mol_id

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def mask_positions(self) -> np.ndarray:
        return np.flatnonzero(self.atom_targets != IGNORE_INDEX)


def masked_count(n: int, mask_rate: float = 0.15) -> int:
    """Number of token positions to mask; at least one."""
    return max(1, math.floor(mask_rate * n + 1e-9))


def sample_rng(seed: int, epoch: int, mol_id: str) -> np.random.Generator:
    """Generator for one molecule's noise, reproducible across resumes."""
    return np.random.default_rng([seed, epoch, zlib.crc32(mol_id.encode("utf-8"))])


def make_noised_sample(
    graph: MolecularGraph,
    rng: np.random.Generator,
    mask_rate: float = 0.15,
    sigma: float = 0.2,
    feat_mask_p: float = 0.5,
    spd: Optional[np.ndarray] = None,
) -> NoisedSample:
    n = graph.n
    positions = rng.choice(n, size=masked_count(n, mask_rate), replace=False)
    masked_tokens = graph.atom_token.astype(np.int64).copy()
    atom_targets = np.full(n, IGNORE_INDEX, dtype=np.int64)
    atom_targets[positions] = masked_tokens[positions]
    masked_tokens[positions] = MASK_TOKEN

    atomic_masked, bond_masked, spd_masked = (bool(flag) for flag in rng.random(3) < feat_mask_p)

    coords = np.asarray(graph.coords, dtype=np.float64)
    if sigma > 0:
        noised = coords + rng.normal(0.0, sigma, size=coords.shape)
        noised = kabsch_align(noised, coords).aligned
    else:
        noised = coords.copy()

    return NoisedSample(
        graph=graph,
        spd=compute_spd(graph) if spd is None else spd,
        masked_tokens=masked_tokens,
        atom_targets=atom_targets,
        atomic_masked=atomic_masked,
        bond_masked=bond_masked,
        spd_masked=spd_masked,
        noised_coords=noised,
        coords=coords,
        distances=pair_distances(coords),
    )
