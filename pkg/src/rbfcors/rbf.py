"""Cubic radial basis function response surface with an optional space rescaling.

The surface through n samples is

    s(x) = sum_i  w_i * ||T (x - x_i)||^3  +  b . x  +  a

with a linear tail in the raw (unscaled) coordinates.  The coefficients come
from the square augmented system that pairs the interpolation conditions with
the unisolvency side conditions sum(w) = 0 and sum(w_i x_i) = 0, the standard
construction for a conditionally positive definite kernel of order 2.

The scaling matrix T reshapes kernel distances to follow the geometry of the
low-value region: a large cloud of uniform points is ranked by the current
surface, the best fraction approximates the valley, and T is assembled from
the eigensystem of that cloud's covariance with rows eigvec_i / sqrt(eigval_i).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist, pdist

log = logging.getLogger(__name__)

_MIN_CENTER_SEPARATION = 1e-10
_CONDITION_LIMIT = 1e12
_DIAGONAL_NUDGE = 1e-10
_EIGENVALUE_FLOOR_RATIO = 1e-8


class SingularFitError(RuntimeError):
    """The interpolation system is singular or hopelessly ill-conditioned,
    usually a sign of duplicate centers or degenerate geometry."""


@dataclass
class RbfModel:
    """Fitted cubic RBF interpolant.

    centers: (n, d) sample locations in the unit cube
    weights: (n,) kernel coefficients
    tail_linear / tail_const: the linear tail b . x + a (raw coordinates)
    scaling: (d, d) distance-scaling matrix T, identity when unscaled
    """

    centers: np.ndarray
    weights: np.ndarray
    tail_linear: np.ndarray
    tail_const: float
    scaling: np.ndarray

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    def evaluate_many(self, points) -> np.ndarray:
        """Evaluate the surface at each row of an (m, d) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {pts.shape[1]}")
        dists = cdist(pts @ self.scaling.T, self.centers @ self.scaling.T)
        return dists**3 @ self.weights + pts @ self.tail_linear + self.tail_const

    def evaluate(self, x) -> float:
        """Evaluate the surface at a single point."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return float(self.evaluate_many(x[None, :])[0])


@dataclass(frozen=True)
class SpaceScaling:
    """Distance rescaling derived from the covariance of the best cloud points.

    matrix rows are eigvec_i / sqrt(eigval_i); eigenvalues are stored after
    clamping tiny ones to a floor relative to the largest, since a flat cloud
    direction would otherwise blow up the division.  degenerate marks the
    identity fallback used when the cloud carries no spatial information.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate: bool = False


def fit(points, values, scaling: np.ndarray | None = None) -> RbfModel:
    """Interpolate (points, values) with a cubic RBF plus linear tail.

    Needs n >= d + 2 pairwise-distinct points so the augmented system is
    square and generically nonsingular.  If the system condition estimate
    exceeds 1e12 a tiny diagonal perturbation is added to the kernel block
    and the solve retried once; near-duplicate centers naturally appear late
    in an optimization run, when the exclusion radius approaches zero.
    """
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    n, d = pts.shape
    if vals.shape != (n,):
        raise ValueError(f"expected {n} values, got shape {vals.shape}")
    if n < d + 2:
        raise ValueError(f"need at least d + 2 = {d + 2} points to fit in dimension {d}, got {n}")
    if float(pdist(pts).min()) < _MIN_CENTER_SEPARATION:
        raise SingularFitError("duplicate centers: minimum pairwise distance below 1e-10")

    T = np.eye(d) if scaling is None else np.asarray(scaling, dtype=float)
    if T.shape != (d, d):
        raise ValueError(f"scaling matrix must be {d}x{d}, got {T.shape}")

    scaled = pts @ T.T
    kernel = cdist(scaled, scaled) ** 3
    tail = np.hstack([pts, np.ones((n, 1))])

    system = np.zeros((n + d + 1, n + d + 1))
    system[:n, :n] = kernel
    system[:n, n:] = tail
    system[n:, :n] = tail.T
    rhs = np.concatenate([vals, np.zeros(d + 1)])

    solution = _solve_augmented(system, rhs, n)
    return RbfModel(
        centers=pts.copy(),
        weights=solution[:n],
        tail_linear=solution[n : n + d],
        tail_const=float(solution[n + d]),
        scaling=T.copy(),
    )


def _refined_solve(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve followed by iterative refinement.

    The cubic kernel can push the condition number to 1e10 and beyond for
    tightly clustered centers, where a single LU pass leaves residuals far
    above interpolation accuracy; a few cheap refinement sweeps on the reused
    factorization recover it.
    """
    factor = lu_factor(system)
    solution = lu_solve(factor, rhs)
    if not np.all(np.isfinite(solution)):
        raise np.linalg.LinAlgError("factorization produced non-finite solution")
    for _ in range(3):
        residual = rhs - system @ solution
        correction = lu_solve(factor, residual)
        solution = solution + correction
        if np.abs(correction).max() <= 1e-14 * max(1.0, np.abs(solution).max()):
            break
    return solution


def _solve_augmented(system: np.ndarray, rhs: np.ndarray, n: int) -> np.ndarray:
    """Dense solve with a one-shot diagonal-nudge retry on bad conditioning."""
    try:
        condition = float(np.linalg.cond(system))
    except np.linalg.LinAlgError:
        condition = math.inf
    log.debug("rbf system size %d, condition estimate %.3e", system.shape[0], condition)

    if condition <= _CONDITION_LIMIT:
        try:
            return _refined_solve(system, rhs)
        except (np.linalg.LinAlgError, ValueError):
            pass

    nudged = system.copy()
    nudged[:n, :n] += _DIAGONAL_NUDGE * np.eye(n)
    try:
        return _refined_solve(nudged, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularFitError(
            f"interpolation system is singular (condition estimate {condition:.3e})"
        ) from exc


def compute_space_scaling(
    model: RbfModel,
    cloud_size: int = 10000,
    best_fraction: float = 0.05,
    rng: np.random.Generator | None = None,
) -> SpaceScaling:
    """Derive the scaling matrix T from the low-value cloud of the model.

    Draws cloud_size uniform points in the unit cube, keeps the best_fraction
    with the lowest surface values, and builds T from the eigensystem of the
    kept cloud's covariance (unbiased normalization).  A cloud that collapses
    to a single point yields the identity matrix with the degenerate flag set.
    """
    if cloud_size < 100:
        raise ValueError(f"cloud_size must be at least 100, got {cloud_size}")
    if not 0.0 < best_fraction <= 0.5:
        raise ValueError(f"best_fraction must be in (0, 0.5], got {best_fraction}")
    if rng is None:
        rng = np.random.default_rng()

    d = model.dim
    cloud = rng.random((cloud_size, d))
    surface = model.evaluate_many(cloud)
    keep = max(1, math.ceil(cloud_size * best_fraction))
    kept = cloud[np.argpartition(surface, keep - 1)[:keep]]

    identity = SpaceScaling(
        matrix=np.eye(d), eigenvalues=np.ones(d), eigenvectors=np.eye(d), degenerate=True
    )
    if kept.shape[0] < 2:
        log.warning("space rescaling cloud collapsed to one point; keeping identity scaling")
        return identity

    covariance = np.atleast_2d(np.cov(kept, rowvar=False))
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    largest = float(eigenvalues.max())
    if not np.isfinite(largest) or largest <= 0.0:
        log.warning("space rescaling cloud has no spatial extent; keeping identity scaling")
        return identity

    clamped = np.maximum(eigenvalues, _EIGENVALUE_FLOOR_RATIO * largest)
    directions = eigenvectors.T  # row i is the unit eigenvector for clamped[i]
    matrix = directions / np.sqrt(clamped)[:, None]
    return SpaceScaling(
        matrix=matrix, eigenvalues=clamped, eigenvectors=directions, degenerate=False
    )


def refit_with_scaling(points, values, scaling: SpaceScaling) -> RbfModel:
    """Fit with kernel distances measured through scaling.matrix."""
    return fit(points, values, scaling=scaling.matrix)
