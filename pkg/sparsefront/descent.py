"""Initialization-phase descent solvers: MOPG, MOIHT, MOSPD and the MOHyb cascade."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from . import config
from .constraints import (
    Polyhedron,
    is_feasible,
    normalize_project,
    project_onto_support,
    sparse_project,
    support_feasible,
)
from .directions import common_direction, l_stationary_direction
from .exceptions import ConfigurationError, InfeasibleError, SparseFrontError
from .models import nondominated_filter, support_of, super_supports
from .objectives import ObjectiveModel, ObjectiveSet, ObjectiveTerm, default_lipschitz
from .sfsd import SfsdParams, armijo_full

logger = logging.getLogger(__name__)

# Stationarity reached by the final subspace polish of MOSPD
POLISH_TOL = 1e-6
LINE_SEARCH = SfsdParams(max_iter=1, time_budget=None)


class VectorFunction(Protocol):
    m: int

    def value(self, x: np.ndarray) -> np.ndarray: ...

    def jacobian(self, x: np.ndarray) -> np.ndarray: ...


@dataclass
class MospdParams:
    tau0: float = 1e-2
    sigma: float = 2.0
    eps0: float = 1e-3
    eps_decay: float = 0.9
    xy_gap_stop: float = 1e-3
    max_outer: int = 60
    max_inner: int = 50
    mopg_iter: int = 500
    polish: bool = True

    def __post_init__(self) -> None:
        if self.tau0 <= 0 or self.sigma <= 1 or self.eps0 <= 0 or not 0 < self.eps_decay < 1:
            raise ConfigurationError("MOSPD needs tau0 > 0, sigma > 1, eps0 > 0 and 0 < eps_decay < 1")


@dataclass
class DescentResult:
    """Final point of a descent run.

    ``y`` is the sparse companion of MOSPD (equal to ``x`` for MOIHT);
    ``trace`` holds one row per outer iteration.
    """

    x: np.ndarray
    y: np.ndarray
    status: str
    iterations: int
    origin: str = ""
    trace: list[dict] = field(default_factory=list)


class PenaltyFunction:
    """Q^tau(x, y) = F(x) + tau/2 ||x - y||^2 on every component."""

    def __init__(self, base: VectorFunction, tau: float, y: np.ndarray):
        self.base = base
        self.tau = tau
        self.y = y
        self.m = base.m

    def value(self, x: np.ndarray) -> np.ndarray:
        gap = x - self.y
        return self.base.value(x) + 0.5 * self.tau * float(gap @ gap)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.base.jacobian(x) + self.tau * (x - self.y)[None, :]


def projected_gradient(
    objective: VectorFunction,
    x0: np.ndarray,
    poly: Polyhedron,
    eps: float,
    max_iter: int = 500,
    support: Optional[Sequence[int]] = None,
) -> tuple[np.ndarray, int, float]:
    """Multi-objective projected gradient with Armijo steps.

    Returns:
        (x, iterations, theta) where theta >= -eps unless the cap was hit
    """
    x = np.asarray(x0, dtype=float)
    J = tuple(range(poly.n)) if support is None else tuple(support)
    theta = -np.inf
    for iteration in range(max_iter):
        direction = common_direction(x, J, objective.jacobian(x), poly)
        theta = direction.theta
        if theta >= -eps:
            return x, iteration, theta
        alpha, accepted = armijo_full(x, direction.v, theta, objective, LINE_SEARCH)
        if not accepted:
            logger.debug("projected gradient line search failed at theta=%.3e", theta)
            return x, iteration, theta
        x = x + alpha * direction.v
    return x, max_iter, theta


def mopg(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    x0: Sequence[float],
    poly: Polyhedron,
    eps: float,
    max_iter: int = 500,
) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    report = is_feasible(x0, poly, tol=1e-6)
    if not report:
        raise InfeasibleError(f"projected gradient start is infeasible: {report.summary()}")
    x, _, _ = projected_gradient(ObjectiveSet(model, selection), x0, poly, eps, max_iter)
    return x


def _check_start(x0: np.ndarray, poly: Polyhedron, s: int) -> None:
    report = is_feasible(x0, poly, s, tol=1e-6)
    if not report:
        raise InfeasibleError(f"start point is infeasible: {report.summary()}")


def iterative_hard_thresholding(
    objective: VectorFunction,
    x0: np.ndarray,
    poly: Polyhedron,
    s: int,
    L: float,
    theta_tol: float = config.THETA_TOL,
    max_iter: int = 1000,
    budget: int = config.ENUMERATION_BUDGET,
) -> DescentResult:
    x = np.asarray(x0, dtype=float)
    _check_start(x, poly, s)
    trace = []
    for iteration in range(max_iter):
        direction = l_stationary_direction(x, L, objective.jacobian(x), poly, s, budget)
        trace.append({"iteration": iteration, "theta": direction.theta, "support": direction.support})
        if direction.status == "infeasible":
            raise InfeasibleError("no support admits a feasible L-stationarity subproblem")
        if direction.theta >= theta_tol:
            return DescentResult(x, x.copy(), "l_stationary", iteration, "moiht", trace)
        x = x + direction.v
    return DescentResult(x, x.copy(), "budget_exhausted", max_iter, "moiht", trace)


def moiht(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    x0: Sequence[float],
    poly: Polyhedron,
    s: int,
    L: Optional[float] = None,
    theta_tol: float = config.THETA_TOL,
    max_iter: int = 1000,
    budget: int = config.ENUMERATION_BUDGET,
) -> DescentResult:
    """Multi-objective iterative hard thresholding from a feasible sparse start."""
    objective = ObjectiveSet(model, selection)
    L = default_lipschitz(objective) if L is None else L
    return iterative_hard_thresholding(objective, np.asarray(x0, dtype=float), poly, s, L, theta_tol, max_iter, budget)


def _sparse_report_point(
    objective: VectorFunction,
    x: np.ndarray,
    y: np.ndarray,
    x0: np.ndarray,
    poly: Polyhedron,
    s: int,
    params: MospdParams,
) -> np.ndarray:
    """Cardinality-feasible point reported by MOSPD, polished on its support."""
    if len(support_of(x)) <= s:
        point = x
    else:
        point = normalize_project(y, s)
        if not is_feasible(point, poly, s, tol=1e-6):
            point = None
            for J in super_supports(normalize_project(y, s), s):
                if support_feasible(poly, J):
                    point = project_onto_support(y, poly, J)
                    break
            if point is None:
                logger.warning("no feasible support near the penalty solution; reporting the start point")
                return x0
    if not params.polish:
        return point
    J = super_supports(point, s)[0]
    if not support_feasible(poly, J):
        return point
    polished, _, _ = projected_gradient(objective, point, poly, POLISH_TOL, params.mopg_iter, support=J)
    return polished


def penalty_decomposition(
    objective: VectorFunction,
    x0: np.ndarray,
    poly: Polyhedron,
    s: int,
    params: Optional[MospdParams] = None,
) -> DescentResult:
    """Sparse penalty decomposition with alternate minimisation."""
    params = params or MospdParams()
    x0 = np.asarray(x0, dtype=float)
    _check_start(x0, poly, s)
    F0 = objective.value(x0)
    x, y = x0.copy(), x0.copy()
    tau, eps = params.tau0, params.eps0
    status = "budget_exhausted"
    trace = []
    outer = 0
    everything = tuple(range(poly.n))

    for outer in range(1, params.max_outer + 1):
        penalty = PenaltyFunction(objective, tau, y)
        x_trial, _, _ = projected_gradient(penalty, x, poly, eps, params.mopg_iter)
        # Componentwise level-set test against the start
        if np.all(penalty.value(x_trial) <= F0):
            u, v = x, y
        else:
            u, v = x0.copy(), x0.copy()

        for _ in range(params.max_inner):
            penalty = PenaltyFunction(objective, tau, v)
            if common_direction(u, everything, penalty.jacobian(u), poly).theta >= -eps:
                break
            u, _, _ = projected_gradient(penalty, u, poly, eps, params.mopg_iter)
            v = sparse_project(u, s)

        x, y = u, v
        gap = float(np.linalg.norm(x - y))
        trace.append({"iteration": outer, "gap": gap, "tau": tau, "eps": eps})
        logger.debug("mospd outer %d: gap=%.3e tau=%.3e eps=%.3e", outer, gap, tau, eps)
        tau *= params.sigma
        eps *= params.eps_decay
        if gap <= params.xy_gap_stop:
            status = "molz_stationary"
            break

    point = _sparse_report_point(objective, x, y, x0, poly, s, params)
    return DescentResult(point, y, status, outer, "mospd", trace)


def mospd(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    x0: Sequence[float],
    poly: Polyhedron,
    s: int,
    params: Optional[MospdParams] = None,
) -> DescentResult:
    return penalty_decomposition(ObjectiveSet(model, selection), np.asarray(x0, dtype=float), poly, s, params)


def mohyb(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    starts: Sequence[np.ndarray],
    poly: Polyhedron,
    s: int,
    params: Optional[MospdParams] = None,
    L: Optional[float] = None,
    moiht_iter: int = 1000,
    time_budget: Optional[float] = None,
) -> list[DescentResult]:
    """MOIHT then MOSPD from each start; merged and nondominated-filtered.

    A failing start is logged and skipped. With ``time_budget`` set, starts not
    begun before the deadline are skipped.
    """
    if not len(starts):
        return []
    objective = ObjectiveSet(model, selection)
    L = default_lipschitz(objective) if L is None else L
    deadline = None if time_budget is None else time.monotonic() + time_budget

    def cascade(start: np.ndarray) -> list[DescentResult]:
        if deadline is not None and time.monotonic() >= deadline:
            return []
        try:
            first = iterative_hard_thresholding(objective, np.asarray(start, dtype=float), poly, s, L, max_iter=moiht_iter)
            second = penalty_decomposition(objective, first.x, poly, s, params)
        except SparseFrontError as exc:
            logger.warning("MOHyb start skipped: %s", exc)
            return []
        return [first, second]

    with ThreadPoolExecutor(max_workers=config.NUM_THREADS) as pool:
        batches = list(pool.map(cascade, starts))
    results = [result for batch in batches for result in batch]
    if not results:
        return []
    keep = nondominated_filter([objective.value(r.x) for r in results])
    logger.info("mohyb: %d starts produced %d points, %d nondominated", len(starts), len(results), len(keep))
    return [results[i] for i in keep]
