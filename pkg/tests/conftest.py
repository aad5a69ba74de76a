"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from molscale.config import settings
from molscale.model import get_preset
from molscale.molgraph import MolecularGraph, make_synthetic_molecule, synthetic_dataset, write_dataset


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep logs and run manifests inside the test's temporary directory."""
    monkeypatch.setattr(settings, "log_path", tmp_path / "logs")
    monkeypatch.setattr(settings, "runs_path", tmp_path / "runs")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def molecule(rng: np.random.Generator) -> MolecularGraph:
    """A small valid random molecule."""
    return make_synthetic_molecule(rng, 6, mol_id="mol-a", scaffold_id="scaf-a")


@pytest.fixture
def molecules() -> list[MolecularGraph]:
    """Sixteen synthetic molecules of 4 to 8 atoms."""
    return synthetic_dataset(16, seed=7, min_atoms=4, max_atoms=8)


@pytest.fixture
def tiny_config():
    return get_preset("tiny")


@pytest.fixture
def dataset_file(tmp_path: Path, molecules: list[MolecularGraph]) -> Path:
    path = tmp_path / "molecules.jsonl"
    write_dataset(molecules, path)
    return path


@pytest.fixture
def ethanol() -> MolecularGraph:
    """Three heavy atoms in a chain: C-C-O with fixed geometry."""
    n = 3
    bond_type = np.zeros((n, n), dtype=np.int64)
    bond_type[0, 1] = bond_type[1, 0] = 1
    bond_type[1, 2] = bond_type[2, 1] = 1
    return MolecularGraph(
        mol_id="ethanol",
        scaffold_id="acyclic",
        atom_token=np.array([6, 6, 8]),
        chirality=np.zeros(n, dtype=np.int64),
        degree=np.array([1, 2, 1]),
        formal_charge=np.full(n, 5, dtype=np.int64),
        num_h=np.array([3, 2, 1]),
        radical_e=np.zeros(n, dtype=np.int64),
        hybridization=np.full(n, 3, dtype=np.int64),
        aromatic=np.zeros(n, dtype=np.int64),
        in_ring=np.zeros(n, dtype=np.int64),
        bond_type=bond_type,
        bond_stereo=np.zeros((n, n), dtype=np.int64),
        bond_conj=np.zeros((n, n), dtype=np.int64),
        coords=np.array([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0], [2.0, 1.4, 0.0]]),
    )
