"""Exclusion-radius schedule and constrained surrogate minimization.

Each subsequent iteration places a forbidden ball of radius r around every
point sampled so far and picks the point that minimizes the response surface
outside all the balls.  Instead of cycling r through a fixed list, the total
ball volume relative to the unit cube (the ball density) starts at a chosen
value and decays to zero over the iteration budget, moving the search from
global exploration to pure surrogate exploitation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .rbf import RbfModel


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit-radius ball in `dim` dimensions."""
    if dim < 1:
        raise ValueError(f"dimension must be at least 1, got {dim}")
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def exclusion_radius(density: float, n_points: int, dim: int) -> float:
    """Ball radius at which n_points balls jointly reach the given density.

    Solves density = n_points * v1 * r^dim for r, with v1 the unit-ball
    volume.  Overlaps and volume outside the cube make the achieved density
    an upper bound, which is fine for a schedule.
    """
    if n_points < 1:
        raise ValueError(f"need at least one center, got {n_points}")
    return (density / (n_points * unit_ball_volume(dim))) ** (1.0 / dim)


@dataclass(frozen=True)
class RadiusSchedule:
    """Per-iteration ball density and the radius it implies.

    Density decays from initial_density at iteration 1 to exactly 0 at
    iteration total_iters, polynomially with exponent decay_exponent
    (1 = linear decay).  n_init only provides the default center count in
    the serial wiring; callers pass the live count to radius().
    """

    initial_density: float
    decay_exponent: float
    total_iters: int
    n_init: int
    dim: int

    def __post_init__(self):
        if not 0.0 < self.initial_density <= 1.0:
            raise ValueError(f"initial_density must be in (0, 1], got {self.initial_density}")
        if self.decay_exponent <= 0.0:
            raise ValueError(f"decay_exponent must be positive, got {self.decay_exponent}")
        if self.total_iters < 1:
            raise ValueError(f"total_iters must be at least 1, got {self.total_iters}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be at least 1, got {self.n_init}")
        if self.dim < 1:
            raise ValueError(f"dim must be at least 1, got {self.dim}")

    def density(self, iteration: int) -> float:
        """Ball density at a 1-based iteration index; 0 at the last iteration."""
        if not 1 <= iteration <= self.total_iters:
            raise ValueError(
                f"iteration must be in [1, {self.total_iters}], got {iteration}"
            )
        if self.total_iters == 1:
            # A single subsequent iteration can only be pure exploitation.
            return 0.0
        frac = (self.total_iters - iteration) / (self.total_iters - 1)
        return self.initial_density * frac**self.decay_exponent

    def radius(self, iteration: int, n_points: int) -> float:
        """Exclusion radius at an iteration, given the current center count."""
        return exclusion_radius(self.density(iteration), n_points, self.dim)


@dataclass(frozen=True)
class ProposalSettings:
    """Knobs of the derivative-free constrained minimization of the surface.

    The search scatters uniform_per_dim * d uniform candidates plus
    local_candidates Gaussian perturbations around the incumbent, filters
    them by the exclusion constraint, and polishes the best survivor with a
    shrinking coordinate-wise pattern search.
    """

    uniform_per_dim: int = 2000
    local_candidates: int = 500
    pattern_steps: int = 50
    initial_step: float = 0.05
    min_step: float = 1e-4


@dataclass(frozen=True)
class Proposal:
    """A proposed sample: location, the radius it honored, and whether the
    exploration fallback (no feasible candidate) was taken."""

    x: np.ndarray
    radius: float
    fallback: bool
    surrogate_value: float


def _min_center_distance(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    if centers.size == 0:
        return np.full(points.shape[0], math.inf)
    return cdist(points, centers).min(axis=1)


def _candidate_set(
    dim: int,
    radius: float,
    rng: np.random.Generator,
    settings: ProposalSettings,
    best_point: np.ndarray | None,
) -> np.ndarray:
    """Uniform candidates plus Gaussian perturbations of the incumbent,
    clipped into the closed unit cube."""
    cands = rng.random((settings.uniform_per_dim * dim, dim))
    if best_point is not None and settings.local_candidates > 0:
        sigma = max(radius, 0.05)
        local = best_point + rng.normal(0.0, sigma, (settings.local_candidates, dim))
        cands = np.vstack([cands, np.clip(local, 0.0, 1.0)])
    return cands


def _pattern_search(
    model: RbfModel,
    x: np.ndarray,
    fx: float,
    centers: np.ndarray,
    radius: float,
    settings: ProposalSettings,
) -> tuple[np.ndarray, float]:
    """Coordinate-wise polish that only ever accepts strict improvements and
    never steps outside the cube or inside an exclusion ball."""
    d = x.size
    step = settings.initial_step
    for _ in range(settings.pattern_steps):
        improved = False
        for axis in range(d):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[axis] += sign * step
                if trial[axis] < 0.0 or trial[axis] > 1.0:
                    continue
                if radius > 0.0 and _min_center_distance(trial[None, :], centers)[0] < radius:
                    continue
                value = model.evaluate(trial)
                if value < fx:
                    x, fx = trial, value
                    improved = True
        if not improved:
            step *= 0.5
            if step < settings.min_step:
                break
    return x, fx


def propose_point(
    model: RbfModel,
    centers,
    radius: float,
    rng: np.random.Generator,
    settings: ProposalSettings | None = None,
    best_point=None,
) -> Proposal:
    """Pick the next sample: minimize the surface at least `radius` away from
    every center.

    Candidates violating the distance constraint are dropped; the best
    survivor is refined by pattern search.  If no candidate is feasible
    (radius too large for the remaining free space), the candidate farthest
    from the centers is returned instead and the fallback flag is set, which
    keeps the evaluation budget moving.
    """
    if radius < 0.0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if settings is None:
        settings = ProposalSettings()
    centers = np.asarray(centers, dtype=float).reshape(-1, model.dim)
    if best_point is not None:
        best_point = np.asarray(best_point, dtype=float)

    cands = _candidate_set(model.dim, radius, rng, settings, best_point)
    dmin = _min_center_distance(cands, centers)
    feasible = dmin >= radius

    if not feasible.any():
        farthest = int(np.argmax(dmin))
        x = cands[farthest]
        return Proposal(x=x, radius=radius, fallback=True, surrogate_value=model.evaluate(x))

    values = model.evaluate_many(cands[feasible])
    best = int(np.argmin(values))
    x, fx = _pattern_search(
        model, cands[feasible][best], float(values[best]), centers, radius, settings
    )
    return Proposal(x=x, radius=radius, fallback=False, surrogate_value=fx)


def propose_batch(
    model: RbfModel,
    centers,
    schedule: RadiusSchedule,
    start_iter: int,
    batch: int,
    rng: np.random.Generator,
    settings: ProposalSettings | None = None,
    best_point=None,
) -> list[Proposal]:
    """Propose `batch` points from one fitted model, consuming consecutive
    iteration indices of the schedule.

    Each pending proposal immediately joins the constraint centers and the
    center count used for the next radius, so points within one batch keep
    their mutual distance even though none has been evaluated yet.
    """
    if batch < 1:
        raise ValueError(f"batch must be at least 1, got {batch}")
    if start_iter + batch - 1 > schedule.total_iters:
        raise ValueError(
            f"batch of {batch} starting at iteration {start_iter} exceeds "
            f"the schedule budget of {schedule.total_iters}"
        )
    working = np.asarray(centers, dtype=float).reshape(-1, model.dim)
    proposals: list[Proposal] = []
    for j in range(batch):
        radius = schedule.radius(start_iter + j, working.shape[0])
        prop = propose_point(model, working, radius, rng, settings, best_point)
        proposals.append(prop)
        working = np.vstack([working, prop.x[None, :]])
    return proposals
