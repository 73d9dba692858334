"""Latin hypercube construction by iterated plane exchanges.

An n-point Latin hypercube places points on an n-per-axis mesh with exactly
one point in every axis-aligned plane.  Starting from the diagonal design,
random pairs of planes are swapped and a swap is kept only when it strictly
lowers the inverse-distance spread, which drives the design toward a uniform
covering of the unit cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

_COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class LatinHypercube:
    """n points on an n^d mesh, one per axis-aligned plane.

    perms has shape (d, n): point k sits at mesh index perms[axis, k] on each
    axis.  Every row must be a permutation of 0..n-1, which is exactly the
    Latin hypercube property.
    """

    perms: np.ndarray

    def __post_init__(self):
        perms = np.asarray(self.perms, dtype=int)
        object.__setattr__(self, "perms", perms)
        if perms.ndim != 2:
            raise ValueError("perms must be a (d, n) integer array")
        d, n = perms.shape
        if n < 2 or d < 1:
            raise ValueError(f"need n >= 2 points and d >= 1 axes, got n={n}, d={d}")
        ref = np.arange(n)
        for axis in range(d):
            if not np.array_equal(np.sort(perms[axis]), ref):
                raise ValueError(f"axis {axis} indices are not a permutation of 0..{n - 1}")

    @property
    def n_points(self) -> int:
        return self.perms.shape[1]

    @property
    def dim(self) -> int:
        return self.perms.shape[0]

    def unit_points(self) -> np.ndarray:
        """Embed the mesh in the closed unit cube: index j maps to j/(n-1)."""
        return self.perms.T / (self.n_points - 1)


def spread(points) -> float:
    """Sum of inverse pairwise distances; lower means more uniform.

    Returns +inf when two points (nearly) coincide.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("spread needs at least two points")
    dists = pdist(pts)
    if np.any(dists < _COINCIDENT_TOL):
        return math.inf
    return float(np.sum(1.0 / dists))


def diagonal_lh(n: int, d: int) -> LatinHypercube:
    """Initial design with every point on the main diagonal of the mesh."""
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if d < 1:
        raise ValueError(f"need at least 1 axis, got {d}")
    return LatinHypercube(np.tile(np.arange(n), (d, 1)))


def _touched_pair_terms(coords: np.ndarray, k1: int, k2: int) -> float:
    """Sum of 1/dist over the pairs whose distance a (k1, k2) swap can change.

    Those are all pairs containing exactly one of k1, k2; the k1-k2 distance
    itself is invariant under swapping one coordinate between them.
    """
    mask = np.ones(coords.shape[0], dtype=bool)
    mask[[k1, k2]] = False
    total = 0.0
    for k in (k1, k2):
        diff = coords[mask] - coords[k]
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        total += float(np.sum(1.0 / dists))
    return total


def improve_lh(lh: LatinHypercube, attempts: int = 1000, rng: np.random.Generator | None = None) -> LatinHypercube:
    """Refine a Latin hypercube by random plane exchanges.

    Each attempt picks a random axis and two random entries of that axis's
    permutation and swaps their mesh indices (equivalently, swaps the two
    axis-aligned planes through those points).  The swap is kept only when
    the spread strictly decreases, so the result never gets worse and stays
    a Latin hypercube.  The spread is updated incrementally from the pair
    terms touched by the swap.
    """
    if attempts < 0:
        raise ValueError(f"attempts must be non-negative, got {attempts}")
    if rng is None:
        rng = np.random.default_rng()
    if attempts == 0:
        return lh

    perms = lh.perms.copy()
    n, d = lh.n_points, lh.dim
    coords = lh.unit_points().copy()

    for _ in range(attempts):
        axis = int(rng.integers(d))
        k1, k2 = (int(i) for i in rng.choice(n, size=2, replace=False))
        before = _touched_pair_terms(coords, k1, k2)
        c1, c2 = coords[k1, axis], coords[k2, axis]
        coords[k1, axis], coords[k2, axis] = c2, c1
        after = _touched_pair_terms(coords, k1, k2)
        if after < before:
            perms[axis, k1], perms[axis, k2] = perms[axis, k2], perms[axis, k1]
        else:
            coords[k1, axis], coords[k2, axis] = c1, c2

    return LatinHypercube(perms)
