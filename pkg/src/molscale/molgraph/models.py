"""Molecular data model and feature vocabularies."""

from dataclasses import dataclass

import numpy as np

from molscale.errors import RangeError

# Atom feature vocabularies (sizes include every valid code)
ATOM_TOKEN_VOCAB = 119  # atomic number codes
MASK_TOKEN = 119
PAD_TOKEN = 120
TOKEN_VOCAB = 121  # atom types + MASK + PAD

ATOMIC_FEATURE_VOCAB: dict[str, int] = {
    "chirality": 6,
    "formal_charge": 11,
    "num_h": 9,
    "radical_e": 5,
    "hybridization": 5,
    "aromatic": 2,
    "in_ring": 2,
}
DEGREE_VOCAB = 11
MAX_DEGREE = DEGREE_VOCAB - 1

# Bond feature vocabularies; bond_type 0 means "no bond"
BOND_FEATURE_VOCAB: dict[str, int] = {
    "bond_type": 5,
    "bond_stereo": 6,
    "bond_conj": 2,
}
BOND_TYPE_NAMES = ("NONE", "SINGLE", "DOUBLE", "TRIPLE", "AROMATIC")

# Shortest path distance codes
SPD_CAP = 20
UNREACHABLE_CODE = SPD_CAP + 1
SPD_VOCAB = SPD_CAP + 2

ATOM_FIELDS = ("atom_token", "degree", *ATOMIC_FEATURE_VOCAB)
BOND_FIELDS = tuple(BOND_FEATURE_VOCAB)


@dataclass(frozen=True, eq=False)
class MolecularGraph:
    """One molecule: per-atom codes, dense bond matrices and 3D coordinates (Å)."""

    mol_id: str
    scaffold_id: str
    atom_token: np.ndarray
    chirality: np.ndarray
    degree: np.ndarray
    formal_charge: np.ndarray
    num_h: np.ndarray
    radical_e: np.ndarray
    hybridization: np.ndarray
    aromatic: np.ndarray
    in_ring: np.ndarray
    bond_type: np.ndarray
    bond_stereo: np.ndarray
    bond_conj: np.ndarray
    coords: np.ndarray

    @property
    def n(self) -> int:
        return int(self.atom_token.shape[0])

    @property
    def atomic_features(self) -> dict[str, np.ndarray]:
        """The seven-field atomic composite, keyed by feature name."""
        return {name: getattr(self, name) for name in ATOMIC_FEATURE_VOCAB}

    def validate(self) -> None:
        """Check every data-model invariant. Raises RangeError on the first violation."""
        n = self.n
        if n < 1:
            raise RangeError(f"{self.mol_id}: molecule has no atoms")

        vocab = {"atom_token": ATOM_TOKEN_VOCAB, "degree": DEGREE_VOCAB, **ATOMIC_FEATURE_VOCAB}
        for name, size in vocab.items():
            values = getattr(self, name)
            if values.shape != (n,):
                raise RangeError(f"{self.mol_id}: {name} has shape {values.shape}, expected ({n},)")
            _check_codes(self.mol_id, name, values, size)

        for name, size in BOND_FEATURE_VOCAB.items():
            matrix = getattr(self, name)
            if matrix.shape != (n, n):
                raise RangeError(f"{self.mol_id}: {name} has shape {matrix.shape}, expected ({n}, {n})")
            _check_codes(self.mol_id, name, matrix, size)
            if not np.array_equal(matrix, matrix.T):
                raise RangeError(f"{self.mol_id}: {name} matrix is not symmetric")

        if np.any(np.diag(self.bond_type) != 0):
            raise RangeError(f"{self.mol_id}: atom bonded to itself")

        expected_degree = np.minimum((self.bond_type != 0).sum(axis=1), MAX_DEGREE)
        mismatch = np.nonzero(expected_degree != self.degree)[0]
        if mismatch.size:
            i = int(mismatch[0])
            raise RangeError(
                f"{self.mol_id}: degree of atom {i} is {int(self.degree[i])} "
                f"but the bond matrix gives {int(expected_degree[i])}"
            )

        if self.coords.shape != (n, 3):
            raise RangeError(f"{self.mol_id}: coords have shape {self.coords.shape}, expected ({n}, 3)")
        if not np.all(np.isfinite(self.coords)):
            raise RangeError(f"{self.mol_id}: non-finite coordinates")


def _check_codes(mol_id: str, name: str, values: np.ndarray, size: int) -> None:
    bad = (values < 0) | (values >= size)
    if np.any(bad):
        value = int(values[bad].flat[0])
        raise RangeError(f"{mol_id}: {name} code {value} outside [0, {size})")
