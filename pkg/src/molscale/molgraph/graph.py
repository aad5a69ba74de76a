"""Graph shortest paths and pairwise geometry."""

import numpy as np

from molscale.molgraph.models import SPD_CAP, UNREACHABLE_CODE, MolecularGraph

SpdMatrix = np.ndarray


def compute_spd(graph: MolecularGraph) -> SpdMatrix:
    """Hop-count shortest path distances via Floyd-Warshall.

    Bonds are unit-weight undirected edges. Distances above SPD_CAP are clamped to
    SPD_CAP and disconnected pairs get UNREACHABLE_CODE.
    """
    n = graph.n
    dist = np.full((n, n), np.inf)
    dist[graph.bond_type != 0] = 1.0
    np.fill_diagonal(dist, 0.0)

    for k in range(n):
        dist = np.minimum(dist, dist[:, k, None] + dist[None, k, :])

    spd = np.where(np.isinf(dist), UNREACHABLE_CODE, np.minimum(dist, SPD_CAP))
    return spd.astype(np.int64)


def pair_distances(coords: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of an (..., n, 3) coordinate array."""
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[..., :, None, :] - coords[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))
