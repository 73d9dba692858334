"""Optimization driver: initial design, model refits, batched sampling.

The run alternates between fitting the response surface to everything
evaluated so far and proposing a batch of new points under the shrinking
exclusion-radius schedule.  Batches are evaluated concurrently; all random
draws happen serially in the driver, so results depend only on the seed and
the batch size, not on worker count or completion order.
"""

from __future__ import annotations

import logging
import math
import sys
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace

import numpy as np

from .cors import Proposal, ProposalSettings, RadiusSchedule, propose_batch
from .lhs import diagonal_lh, improve_lh
from .rbf import RbfModel, compute_space_scaling, fit, refit_with_scaling
from .scaling import BoundedDomain, ObjectiveRescaler, fit_rescaler, maximization_wrapper

log = logging.getLogger(__name__)


class BatchEvaluationError(RuntimeError):
    """An objective call in a batch raised; carries finished results.

    completed maps batch positions to objective values for the calls that
    finished before the failure was observed.
    """

    def __init__(self, message: str, completed: dict[int, float]):
        super().__init__(message)
        self.completed = completed


class ObjectiveError(RuntimeError):
    """The objective failed during a run; carries the partial history."""

    def __init__(self, message: str, history: list[EvaluationRecord]):
        super().__init__(message)
        self.history = history


@dataclass
class OptimizationConfig:
    """Run settings.

    batch_size controls how many proposals are drawn per model refit and
    therefore the sequence of sampled points; workers only controls how many
    objective calls run concurrently.  The default batch_size (None) follows
    workers, so a parallel run uses its full width, but pinning batch_size
    makes results reproducible across machines with different core counts.
    """

    n_init: int
    n_iter: int
    initial_density: float = 0.75
    decay_exponent: float = 1.0
    keep_fraction: float = 0.75
    lh_attempts: int = 1000
    cloud_size: int = 10000
    best_fraction: float = 0.05
    workers: int = 1
    batch_size: int | None = None
    seed: int | None = None
    use_space_rescaling: bool = True
    maximize: bool = False
    proposal: ProposalSettings = field(default_factory=ProposalSettings)

    def validate(self, dim: int) -> None:
        if self.n_init < dim + 2:
            raise ValueError(
                f"n_init must be at least dim + 2 = {dim + 2} to fit the "
                f"surface, got {self.n_init}"
            )
        if self.n_iter < 0:
            raise ValueError(f"n_iter must be non-negative, got {self.n_iter}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")

    def effective_batch(self) -> int:
        return self.workers if self.batch_size is None else self.batch_size


@dataclass(frozen=True)
class EvaluationRecord:
    """One objective evaluation.

    stage is "initial" for the space-filling design and "subsequent"
    afterwards.  f_raw is the objective as minimized internally (already
    inverted when maximizing); f_scaled is its squashed value used for
    fitting.  radius_used is None for initial-design points.
    """

    stage: str
    index: int
    x_unit: np.ndarray
    x_original: np.ndarray
    f_raw: float
    f_scaled: float | None
    radius_used: float | None
    fallback: bool


@dataclass(frozen=True)
class OptimizationResult:
    best_x: np.ndarray
    best_f: float
    history: list[EvaluationRecord]
    schedule_trace: list[tuple[int, float, float]]
    rescaler: ObjectiveRescaler
    domain: BoundedDomain


def evaluate_batch(objective, points, workers: int) -> list[float]:
    """Evaluate the objective at each point, up to `workers` calls at a time.

    Results come back in input order regardless of completion order.  Points
    are fed to the pool lazily, so on the first failure nothing beyond the
    calls already in flight runs; in-flight calls are allowed to finish and
    their results are reported alongside the failure.
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    points = list(points)
    if not points:
        return []
    completed: dict[int, float] = {}
    failures: dict[int, BaseException] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        in_flight: dict = {}
        next_index = 0
        while in_flight or (next_index < len(points) and not failures):
            while (
                not failures and next_index < len(points) and len(in_flight) < workers
            ):
                future = pool.submit(_call_scalar, objective, points[next_index])
                in_flight[future] = next_index
                next_index += 1
            done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
            for future in done:
                index = in_flight.pop(future)
                error = future.exception()
                if error is None:
                    completed[index] = future.result()
                else:
                    failures[index] = error
    if failures:
        index = min(failures)
        raise BatchEvaluationError(
            f"objective failed at point {index}: {failures[index]}", completed
        )
    return [completed[i] for i in range(len(points))]


def _call_scalar(objective, point) -> float:
    value = float(objective(point))
    if not math.isfinite(value):
        raise ValueError(f"objective returned non-finite value {value!r} at {point}")
    return value


def _check_non_negative(values, history: list[EvaluationRecord]) -> None:
    for value in values:
        if value < 0.0:
            raise ObjectiveError(
                f"objective returned negative value {value!r}; the value "
                f"rescaling assumes non-negative objectives",
                history,
            )


def best_so_far(history: list[EvaluationRecord]) -> EvaluationRecord:
    """Record with the lowest f_raw; ties go to the earliest evaluation."""
    if not history:
        raise ValueError("history is empty")
    return min(history, key=lambda rec: (rec.f_raw, rec.index))


def _chunked(seq, size):
    for start in range(0, len(seq), size):
        yield seq[start : start + size]


def run(
    objective,
    domain: BoundedDomain,
    config: OptimizationConfig,
    progress: bool = False,
) -> OptimizationResult:
    """Run the full optimization and return the best point found.

    The objective receives points in original (bounded) coordinates and must
    return a finite scalar.  Exactly n_init + n_iter evaluations are spent.
    """
    config.validate(domain.dim)
    rng = np.random.default_rng(config.seed)
    inner = maximization_wrapper(objective) if config.maximize else objective

    lh = improve_lh(diagonal_lh(config.n_init, domain.dim), config.lh_attempts, rng)
    unit_points = lh.unit_points()

    history: list[EvaluationRecord] = []
    raw_values: list[float] = []
    try:
        for chunk in _chunked(list(range(config.n_init)), config.workers):
            originals = [domain.from_unit(unit_points[i]) for i in chunk]
            values = evaluate_batch(inner, originals, config.workers)
            _check_non_negative(values, history)
            for i, x_orig, value in zip(chunk, originals, values):
                raw_values.append(value)
                history.append(
                    EvaluationRecord(
                        stage="initial",
                        index=i,
                        x_unit=unit_points[i].copy(),
                        x_original=x_orig,
                        f_raw=value,
                        f_scaled=None,
                        radius_used=None,
                        fallback=False,
                    )
                )
    except BatchEvaluationError as err:
        raise ObjectiveError(str(err), history) from err

    rescaler = fit_rescaler(np.asarray(raw_values), config.keep_fraction)
    history = [
        replace(rec, f_scaled=rescaler.rescale(rec.f_raw)) for rec in history
    ]

    schedule_trace: list[tuple[int, float, float]] = []
    if config.n_iter > 0:
        schedule = RadiusSchedule(
            initial_density=config.initial_density,
            decay_exponent=config.decay_exponent,
            total_iters=config.n_iter,
            n_init=config.n_init,
            dim=domain.dim,
        )
        batch = config.effective_batch()
        iteration = 1
        while iteration <= config.n_iter:
            k = min(batch, config.n_iter - iteration + 1)
            centers = np.array([rec.x_unit for rec in history])
            scaled_values = np.array([rec.f_scaled for rec in history])
            model = fit(centers, scaled_values)
            if config.use_space_rescaling:
                scaling = compute_space_scaling(
                    model, config.cloud_size, config.best_fraction, rng
                )
                model = refit_with_scaling(centers, scaled_values, scaling)
            incumbent = best_so_far(history)
            proposals = propose_batch(
                model,
                centers,
                schedule,
                iteration,
                k,
                rng,
                config.proposal,
                incumbent.x_unit,
            )
            originals = [domain.from_unit(p.x) for p in proposals]
            try:
                values = evaluate_batch(inner, originals, config.workers)
            except BatchEvaluationError as err:
                for pos, value in sorted(err.completed.items()):
                    history.append(
                        _iter_record(
                            proposals[pos],
                            originals[pos],
                            value,
                            rescaler,
                            config.n_init + iteration + pos - 1,
                        )
                    )
                raise ObjectiveError(str(err), history) from err
            _check_non_negative(values, history)
            for pos, (prop, x_orig, value) in enumerate(zip(proposals, originals, values)):
                schedule_trace.append(
                    (iteration + pos, schedule.density(iteration + pos), prop.radius)
                )
                history.append(
                    _iter_record(
                        prop, x_orig, value, rescaler, config.n_init + iteration + pos - 1
                    )
                )
            if progress:
                best = best_so_far(history)
                last = schedule_trace[-1]
                print(
                    f"iter={last[0]} rho={last[1]:.6f} r={last[2]:.6f} "
                    f"best={best.f_raw:.6g}",
                    file=sys.stderr,
                )
            iteration += k

    best = best_so_far(history)
    best_f = 1.0 / best.f_raw - 1.0 if config.maximize else best.f_raw
    return OptimizationResult(
        best_x=best.x_original.copy(),
        best_f=best_f,
        history=history,
        schedule_trace=schedule_trace,
        rescaler=rescaler,
        domain=domain,
    )


def _iter_record(
    prop: Proposal,
    x_original: np.ndarray,
    value: float,
    rescaler: ObjectiveRescaler,
    index: int,
) -> EvaluationRecord:
    return EvaluationRecord(
        stage="subsequent",
        index=index,
        x_unit=prop.x.copy(),
        x_original=x_original,
        f_raw=value,
        f_scaled=rescaler.rescale(value),
        radius_used=prop.radius,
        fallback=prop.fallback,
    )
