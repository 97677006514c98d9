"""Sparse Front Steepest Descent: per-support front refinement and exploration."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import config
from .constraints import Polyhedron, is_feasible
from .directions import common_direction, partial_direction
from .exceptions import ConfigurationError, InfeasibleError, NumericalError, PreconditionError
from .models import EvaluatedPoint, FrontList, crowding_distance, nondominated_filter
from .objectives import ObjectiveModel, ObjectiveSet, ObjectiveTerm

logger = logging.getLogger(__name__)


@dataclass
class SfsdParams:
    """Line-search constants, exploration gate and budgets.

    ``max_iter`` and ``time_budget`` may both be set; the first one hit stops the run.
    """

    delta: float = 0.5
    gamma: float = 1e-4
    theta_tol: float = config.THETA_TOL
    h_max: int = 30
    crowding_gate: float = 0.05
    explore: bool = True
    max_iter: Optional[int] = None
    time_budget: Optional[float] = config.SFSD_BUDGET

    def __post_init__(self) -> None:
        if self.max_iter is None and self.time_budget is None:
            raise ConfigurationError("SFSD needs an iteration cap or a time budget")
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.h_max < 0:
            raise ConfigurationError("h_max must be non-negative")


@dataclass
class LinkedTrace:
    """Ancestry of generated points: child key -> (parent key, iteration)."""

    parents: dict[int, tuple[int, int]] = field(default_factory=dict)

    def record(self, child: int, parent: int, iteration: int) -> None:
        self.parents[child] = (parent, iteration)

    def ancestry(self, key: int) -> list[int]:
        """Keys from ``key`` back to its initial point."""
        chain = [key]
        seen = {key}
        while chain[-1] in self.parents:
            parent = self.parents[chain[-1]][0]
            if parent in seen:
                raise PreconditionError(f"linked trace has a cycle through point {parent}")
            seen.add(parent)
            chain.append(parent)
        return chain

    def validate(self) -> None:
        for child, (parent, iteration) in self.parents.items():
            self.ancestry(child)
            if parent in self.parents and self.parents[parent][1] > iteration:
                raise PreconditionError(
                    f"point {child} (iteration {iteration}) descends from point {parent} created later"
                )


def armijo_full(
    x: np.ndarray,
    v: np.ndarray,
    theta: float,
    objective: ObjectiveSet,
    params: SfsdParams,
    Fx: Optional[np.ndarray] = None,
) -> tuple[float, bool]:
    """Largest delta^h with F(x + a v) <= F(x) + gamma a theta componentwise.

    Returns:
        (alpha, accepted); alpha is 0 when no exponent up to h_max qualifies
    """
    if theta >= 0:
        raise PreconditionError(f"line search needs a descent direction, got theta={theta}")
    Fx = objective.value(x) if Fx is None else Fx
    for h in range(params.h_max + 1):
        alpha = params.delta ** h
        try:
            trial = objective.value(x + alpha * v)
        except NumericalError:
            continue
        if np.all(trial <= Fx + params.gamma * alpha * theta):
            return alpha, True
    return 0.0, False


def armijo_explore(
    z: np.ndarray,
    v: np.ndarray,
    front_values: Sequence[np.ndarray],
    objective: ObjectiveSet,
    params: SfsdParams,
) -> float:
    """Largest delta^h whose trial point is not weakly dominated by any same-support entry."""
    for h in range(params.h_max + 1):
        alpha = params.delta ** h
        try:
            trial = objective.value(z + alpha * v)
        except NumericalError:
            continue
        if all(np.any(trial < y) for y in front_values):
            return alpha
    return 0.0


def _objective_subsets(m: int) -> list[tuple[int, ...]]:
    return [I for r in range(1, m + 1) for I in itertools.combinations(range(m), r)]


class SfsdSolver:
    """Runs the outer SFSD loop over a front of (point, super support) pairs.

    After ``run`` the attributes ``iterations`` and ``stop_reason`` describe how
    the loop ended: ``converged``, ``armijo_failed`` (nothing was inserted but some
    point with theta below tolerance found no Armijo step), ``iterations`` or ``time``.
    """

    def __init__(
        self,
        objectives: ObjectiveSet,
        poly: Polyhedron,
        params: Optional[SfsdParams] = None,
        trace: Optional[LinkedTrace] = None,
    ):
        self.objectives = objectives
        self.poly = poly
        self.params = params or SfsdParams()
        self.trace = trace
        self.iterations = 0
        self.stop_reason = ""
        self._keys = itertools.count()
        self._subsets = _objective_subsets(objectives.m)
        self._crowding: dict[int, float] = {}
        self._failed_searches = 0

    def _admit(self, points: Sequence[EvaluatedPoint]) -> FrontList:
        front = FrontList()
        for point in points:
            s = len(point.J)
            report = is_feasible(point.x, self.poly, s, tol=1e-6)
            try:
                point.check(s)
            except InfeasibleError as exc:
                logger.warning("rejected initial point: %s", exc)
                continue
            if not report:
                logger.warning("rejected infeasible initial point: %s", report.summary())
                continue
            front.insert(replace(point, key=next(self._keys)))
        if not len(front):
            raise InfeasibleError("every initial point was rejected as infeasible")
        return front

    def _processing_order(self, front: FrontList) -> list[EvaluatedPoint]:
        points = front.points()
        F = np.vstack([p.F for p in points])
        global_front = set(nondominated_filter(F))
        crowding = np.empty(len(points))
        for J in front.supports():
            members = [i for i, p in enumerate(points) if p.J == J]
            crowding[members] = crowding_distance(F[members])
        self._crowding = {id(p): crowding[i] for i, p in enumerate(points)}
        order = sorted(
            range(len(points)),
            key=lambda i: (i not in global_front, -crowding[i], points[i].J, tuple(points[i].F)),
        )
        return [points[i] for i in order]

    def _new_point(self, parent: EvaluatedPoint, x: np.ndarray, iteration: int) -> EvaluatedPoint:
        point = EvaluatedPoint(
            x=x,
            F=self.objectives.value(x),
            J=parent.J,
            origin=parent.origin,
            weights=parent.weights,
            key=next(self._keys),
        )
        if self.trace is not None:
            self.trace.record(point.key, parent.key, iteration)
        return point

    def _budget_left(self, started: float) -> bool:
        params = self.params
        if params.max_iter is not None and self.iterations >= params.max_iter:
            self.stop_reason = "iterations"
            return False
        if params.time_budget is not None and time.monotonic() - started >= params.time_budget:
            self.stop_reason = "time"
            return False
        return True

    def _step(self, front: FrontList, iteration: int, started: float) -> bool:
        """One outer iteration; returns whether any point was inserted."""
        params = self.params
        active = False
        for point in self._processing_order(front):
            if point not in front:
                continue
            if params.time_budget is not None and time.monotonic() - started >= params.time_budget:
                self.stop_reason = "time"
                return True
            try:
                grads = self.objectives.jacobian(point.x)
                direction = common_direction(point.x, point.J, grads, self.poly)
            except NumericalError as exc:
                logger.warning("skipping point %d: %s", point.key, exc)
                continue

            z = point
            if direction.theta < params.theta_tol:
                alpha, _ = armijo_full(point.x, direction.v, direction.theta, self.objectives, params, point.F)
                if alpha > 0:
                    z = self._new_point(point, point.x + alpha * direction.v, iteration)
                    active = front.insert(z) or active
                else:
                    self._failed_searches += 1

            if not params.explore or self._crowding.get(id(point), np.inf) <= params.crowding_gate:
                continue

            for I in self._subsets:
                if z not in front:
                    break
                try:
                    grads_z = self.objectives.jacobian(z.x)
                    partial = partial_direction(z.x, z.J, grads_z, I, self.poly)
                except NumericalError as exc:
                    logger.warning("skipping subset %s at point %d: %s", I, z.key, exc)
                    continue
                if partial.theta >= params.theta_tol:
                    continue
                values = [p.F for p in front.group(z.J)]
                alpha = armijo_explore(z.x, partial.v, values, self.objectives, params)
                if alpha > 0 and front.insert(self._new_point(z, z.x + alpha * partial.v, iteration)):
                    active = True
        return active

    def run(self, X0: Sequence[EvaluatedPoint] | FrontList) -> FrontList:
        points = list(X0)
        if not points:
            raise PreconditionError("SFSD needs at least one initial point")
        front = self._admit(points)
        started = time.monotonic()
        self.iterations = 0
        self.stop_reason = ""
        while self._budget_left(started):
            self.iterations += 1
            self._failed_searches = 0
            active = self._step(front, self.iterations, started)
            logger.debug("sfsd iteration %d: %d points on %d supports", self.iterations, len(front), len(front.supports()))
            if not active:
                self.stop_reason = "armijo_failed" if self._failed_searches else "converged"
                break
        logger.info(
            "sfsd finished after %d iterations (%s): %d points on %d supports",
            self.iterations, self.stop_reason, len(front), len(front.supports()),
        )
        return front


def sfsd_run(
    X0: Sequence[EvaluatedPoint] | FrontList,
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    poly: Polyhedron,
    params: Optional[SfsdParams] = None,
    trace: Optional[LinkedTrace] = None,
) -> FrontList:
    return SfsdSolver(ObjectiveSet(model, selection), poly, params, trace).run(X0)
