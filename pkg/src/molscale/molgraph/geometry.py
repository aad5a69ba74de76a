"""Rigid superposition of conformations."""

import logging
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

# Relative singular-value threshold below which a centred point cloud is treated as
# rank-deficient (collinear or coincident points).
RANK_TOLERANCE = 1e-8


class KabschResult(NamedTuple):
    """Aligned coordinates, the applied rotation, post-alignment RMSD and a degeneracy flag."""

    aligned: np.ndarray
    rotation: np.ndarray
    rmsd: float
    degenerate: bool = False


def kabsch_align(mobile: np.ndarray, target: np.ndarray) -> KabschResult:
    """Superimpose ``mobile`` onto ``target`` with the RMSD-optimal proper rotation.

    ``aligned = R (mobile - centroid(mobile)) + centroid(target)`` with det(R) = +1.
    Fewer than three points, or a mobile cloud whose centred singular values show
    rank below two, fall back to a translation-only alignment flagged ``degenerate``.
    """
    mobile = np.asarray(mobile, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if mobile.shape != target.shape or mobile.ndim != 2 or mobile.shape[1] != 3:
        raise ValueError(f"kabsch_align: shapes {mobile.shape} and {target.shape} must both be (n, 3)")

    mobile_centroid = mobile.mean(axis=0)
    target_centroid = target.mean(axis=0)
    p = mobile - mobile_centroid
    q = target - target_centroid

    if _is_degenerate(p):
        logger.debug(f"Degenerate Kabsch input with {mobile.shape[0]} points, translating only")
        aligned = p + target_centroid
        return KabschResult(aligned, np.eye(3), _rmsd(aligned, target), True)

    h = p.T @ q
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    correction = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    rotation = vt.T @ correction @ u.T

    aligned = p @ rotation.T + target_centroid
    return KabschResult(aligned, rotation, _rmsd(aligned, target), False)


def _is_degenerate(centred: np.ndarray) -> bool:
    if centred.shape[0] < 3:
        return True
    singular = np.linalg.svd(centred, compute_uv=False)
    if singular[0] == 0.0:
        return True
    return bool(singular[1] <= RANK_TOLERANCE * singular[0])


def _rmsd(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))
