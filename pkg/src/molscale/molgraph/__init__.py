"""Molecular data model, graph distances, alignment and dataset files."""

from molscale.molgraph.geometry import KabschResult, kabsch_align
from molscale.molgraph.graph import compute_spd, pair_distances
from molscale.molgraph.io import MoleculeDatasetReader, read_dataset, write_dataset
from molscale.molgraph.models import (
    MASK_TOKEN,
    PAD_TOKEN,
    SPD_CAP,
    UNREACHABLE_CODE,
    MolecularGraph,
)
from molscale.molgraph.synthetic import make_synthetic_molecule, synthetic_dataset

__all__ = [
    "KabschResult",
    "MASK_TOKEN",
    "MoleculeDatasetReader",
    "MolecularGraph",
    "PAD_TOKEN",
    "SPD_CAP",
    "UNREACHABLE_CODE",
    "compute_spd",
    "kabsch_align",
    "make_synthetic_molecule",
    "pair_distances",
    "read_dataset",
    "synthetic_dataset",
    "write_dataset",
]
