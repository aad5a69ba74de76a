"""Deterministic random molecules for tests, smoke runs and gradient checks."""

from typing import Optional

import numpy as np

from molscale.molgraph.models import MAX_DEGREE, MolecularGraph

# Element mix dominated by C/N/O, by atomic number
ELEMENTS = np.array([6, 7, 8, 9, 16])
ELEMENT_WEIGHTS = np.array([0.70, 0.12, 0.12, 0.03, 0.03])
BOND_LENGTH = 1.5


def make_synthetic_molecule(
    rng: np.random.Generator,
    n: int,
    mol_id: str = "mol-0",
    scaffold_id: str = "scaffold-0",
    ring_closure_p: float = 0.3,
) -> MolecularGraph:
    """Build a valid random molecule with ``n`` atoms.

    Bonds form a random spanning tree (at most four bonds per atom) plus an optional
    ring closure. Coordinates follow the tree as a random walk with 1.5 Å steps.
    """
    bond_type = np.zeros((n, n), dtype=np.int64)
    coords = np.zeros((n, 3))
    for i in range(1, n):
        candidates = [j for j in range(i) if (bond_type[j] != 0).sum() < 4] or list(range(i))
        parent = int(rng.choice(candidates))
        kind = 2 if rng.random() < 0.15 else 1
        bond_type[i, parent] = bond_type[parent, i] = kind
        direction = rng.normal(size=3)
        coords[i] = coords[parent] + BOND_LENGTH * direction / np.linalg.norm(direction)

    in_ring = np.zeros(n, dtype=np.int64)
    if n >= 4 and rng.random() < ring_closure_p:
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        if bond_type[i, j] == 0:
            bond_type[i, j] = bond_type[j, i] = 1
            in_ring[[i, j]] = 1

    degree = np.minimum((bond_type != 0).sum(axis=1), MAX_DEGREE)
    bond_conj = (bond_type == 2).astype(np.int64)
    return MolecularGraph(
        mol_id=mol_id,
        scaffold_id=scaffold_id,
        atom_token=rng.choice(ELEMENTS, size=n, p=ELEMENT_WEIGHTS).astype(np.int64),
        chirality=(rng.random(n) < 0.05).astype(np.int64),
        degree=degree.astype(np.int64),
        formal_charge=np.full(n, 5, dtype=np.int64),
        num_h=np.clip(4 - degree, 0, 8).astype(np.int64),
        radical_e=np.zeros(n, dtype=np.int64),
        hybridization=rng.integers(0, 5, size=n),
        aromatic=np.zeros(n, dtype=np.int64),
        in_ring=in_ring,
        bond_type=bond_type,
        bond_stereo=np.zeros((n, n), dtype=np.int64),
        bond_conj=bond_conj,
        coords=coords,
    )


def synthetic_dataset(
    n_molecules: int,
    seed: int = 0,
    min_atoms: int = 4,
    max_atoms: int = 12,
    n_scaffolds: Optional[int] = None,
) -> list[MolecularGraph]:
    """A reproducible list of molecules spread over long-tailed scaffold groups."""
    rng = np.random.default_rng(seed)
    n_scaffolds = n_scaffolds or max(1, n_molecules // 8)
    weights = 1.0 / np.arange(1, n_scaffolds + 1)
    weights /= weights.sum()

    graphs = []
    for index in range(n_molecules):
        n = int(rng.integers(min_atoms, max_atoms + 1))
        scaffold = int(rng.choice(n_scaffolds, p=weights))
        graphs.append(
            make_synthetic_molecule(
                rng, n, mol_id=f"mol-{index:05d}", scaffold_id=f"scaffold-{scaffold:03d}"
            )
        )
    return graphs
