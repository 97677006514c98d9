"""Weighted-sum scalarization baseline: weight grids and global solves of P(lambda)."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import config
from .constraints import Polyhedron, is_feasible, minimize_on_support, project_onto_support, support_feasible
from .descent import MospdParams, penalty_decomposition
from .exceptions import PreconditionError, SparseFrontError
from .models import EvaluatedPoint, FrontList, SupportSet, nondominated_filter, support_of, super_supports
from .objectives import ObjectiveModel, ObjectiveSet, ObjectiveTerm, WeightedSum
from .seeding import make_rng

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
MULTISTARTS = 5
NODE_BUDGET = 20_000


@dataclass
class ScalarResult:
    x: np.ndarray
    value: float
    optimal: bool
    method: str
    support: SupportSet


def lambda_grid(m: int, count: int) -> list[np.ndarray]:
    """Simplex-lattice weights with the smallest resolution giving at least ``count`` points."""
    if count < m:
        raise PreconditionError(f"need at least {m} weights for {m} objectives, got {count}")
    if m == 1:
        return [np.ones(1)]
    H = 1
    while math.comb(H + m - 1, m - 1) < count:
        H += 1
    grid = []
    # Stars and bars: bar positions split H units into m parts
    for bars in itertools.combinations(range(H + m - 1), m - 1):
        edges = (-1,) + bars + (H + m - 1,)
        parts = [edges[i + 1] - edges[i] - 1 for i in range(m)]
        grid.append(np.array(parts, dtype=float) / H)
    return grid


def quadratic_form(objectives: ObjectiveSet, weights: np.ndarray) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """(H, g) with sum_j w_j f_j(x) = ½xᵀHx + gᵀx, or None if the sum is not a convex quadratic."""
    model = objectives.model
    n = objectives.n
    H = np.zeros((n, n))
    g = np.zeros(n)
    for weight, coeff, term in zip(weights, objectives.signs, objectives.terms):
        k = weight * coeff
        if term.id == "ER":
            g += k * model.c
        elif term.id == "ESG":
            g += k * model.esg
        elif term.id == "V":
            H += k * model.Q
        elif weight != 0:
            return None
    if np.linalg.eigvalsh(H).min() < -1e-10:
        return None
    return H, g


def _better(value: float, support: SupportSet, best: Optional[tuple[float, SupportSet]]) -> bool:
    if best is None:
        return True
    tol = TIE_TOL * max(1.0, abs(best[0]))
    if value < best[0] - tol:
        return True
    return abs(value - best[0]) <= tol and support < best[1]


def _solve_enumeration(H: np.ndarray, g: np.ndarray, poly: Polyhedron, s: int) -> ScalarResult:
    best: Optional[tuple[float, SupportSet]] = None
    best_x = None
    for J in itertools.combinations(range(poly.n), s):
        if not support_feasible(poly, J):
            continue
        x = minimize_on_support(H, g, poly, J)
        value = float(0.5 * x @ H @ x + g @ x)
        if _better(value, J, best):
            best, best_x = (value, J), x
    if best_x is None:
        raise SparseFrontError("no support of size s is feasible")
    return ScalarResult(best_x, best[0], True, "enumeration", best[1])


def _solve_branch_and_bound(
    H: np.ndarray,
    g: np.ndarray,
    poly: Polyhedron,
    s: int,
    node_budget: int = NODE_BUDGET,
) -> ScalarResult:
    """Best-bound-first search on support inclusion with cardinality-relaxed QP bounds."""
    n = poly.n
    counter = itertools.count()
    best: Optional[tuple[float, SupportSet]] = None
    best_x = None

    def value_of(x: np.ndarray) -> float:
        return float(0.5 * x @ H @ x + g @ x)

    def relax(allowed: tuple[int, ...]) -> Optional[np.ndarray]:
        if not allowed or not support_feasible(poly, allowed):
            return None
        return minimize_on_support(H, g, poly, allowed)

    def offer(x: np.ndarray) -> None:
        nonlocal best, best_x
        J = super_supports(x, s)[0] if len(support_of(x)) <= s else None
        if J is None:
            return
        value = value_of(x)
        if _better(value, J, best):
            best, best_x = (value, J), x

    def leaf(allowed: tuple[int, ...]) -> None:
        x = relax(allowed)
        if x is not None:
            offer(x)

    root = relax(tuple(range(n)))
    if root is None:
        raise SparseFrontError("no feasible portfolio exists")
    heap = [(value_of(root), next(counter), (), (), root)]
    nodes = 0
    exhausted = False

    while heap:
        bound, _, fixed_in, fixed_out, x = heapq.heappop(heap)
        if best is not None and bound > best[0] + TIE_TOL * max(1.0, abs(best[0])):
            continue
        nodes += 1
        if nodes > node_budget:
            exhausted = True
            break
        if len(support_of(x)) <= s:
            offer(x)
            continue
        # Heuristic incumbent: fixed assets plus the largest relaxed weights
        free_order = [int(i) for i in np.argsort(-x, kind="stable") if int(i) not in fixed_in]
        guess = tuple(sorted(fixed_in + tuple(free_order[: s - len(fixed_in)])))
        leaf(guess)

        branch = next(i for i in free_order if i not in fixed_out)
        included = tuple(sorted(fixed_in + (branch,)))
        excluded = tuple(sorted(fixed_out + (branch,)))
        if len(included) == s:
            leaf(included)
        else:
            # Inclusion does not change the relaxation
            heapq.heappush(heap, (bound, next(counter), included, fixed_out, x))
        allowed = tuple(i for i in range(n) if i not in excluded)
        if len(allowed) <= s:
            leaf(allowed)
        else:
            child = relax(allowed)
            if child is not None:
                heapq.heappush(heap, (value_of(child), next(counter), fixed_in, excluded, child))

    if best_x is None:
        raise SparseFrontError("branch and bound found no feasible support")
    if exhausted:
        logger.warning("branch and bound node budget %d exhausted; returning best found", node_budget)
    return ScalarResult(best_x, best[0], not exhausted, "branch-and-bound", best[1])


def _random_feasible_start(poly: Polyhedron, s: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    support = tuple(sorted(int(i) for i in rng.choice(poly.n, size=s, replace=False)))
    x = np.zeros(poly.n)
    x[list(support)] = rng.dirichlet(np.ones(s))
    if is_feasible(x, poly, s):
        return x
    if support_feasible(poly, support):
        return project_onto_support(x, poly, support)
    return None


def _solve_nonconvex(
    objectives: ObjectiveSet,
    weights: np.ndarray,
    poly: Polyhedron,
    s: int,
    seed: int,
) -> ScalarResult:
    scalar = WeightedSum(objectives, weights)
    rng = make_rng(seed, "scalarization-starts:" + ",".join(f"{w:.17g}" for w in weights))
    best: Optional[ScalarResult] = None
    for _ in range(MULTISTARTS):
        start = _random_feasible_start(poly, s, rng)
        if start is None:
            continue
        try:
            result = penalty_decomposition(scalar, start, poly, s, MospdParams())
            value = float(scalar.value(result.x)[0])
        except SparseFrontError as exc:
            logger.debug("scalarization multistart failed: %s", exc)
            continue
        if best is None or value < best.value:
            best = ScalarResult(result.x, value, False, "penalty-decomposition", super_supports(result.x, s)[0])
    if best is None:
        raise SparseFrontError("every scalarization multistart failed")
    return best


def scalarize_solve(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    weights: Sequence[float],
    poly: Polyhedron,
    s: int,
    budget: int = config.SCALARIZATION_BUDGET,
    seed: int = 0,
    node_budget: int = NODE_BUDGET,
) -> ScalarResult:
    """Solve min sum_j w_j f_j over the sparse feasible set.

    Convex quadratic sums are solved globally (``optimal`` is False only when the
    branch-and-bound node budget runs out); other sums get a local penalty
    decomposition from random starts.
    """
    weights = np.asarray(weights, dtype=float)
    objectives = ObjectiveSet(model, selection)
    if weights.shape != (objectives.m,) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise PreconditionError(f"weights must be a nonnegative vector of length {objectives.m} summing to 1")
    form = quadratic_form(objectives, weights)
    if form is None:
        return _solve_nonconvex(objectives, weights, poly, s, seed)
    H, g = form
    if math.comb(poly.n, s) <= budget:
        return _solve_enumeration(H, g, poly, s)
    return _solve_branch_and_bound(H, g, poly, s, node_budget)


def scalarization_front(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    poly: Polyhedron,
    s: int,
    grid: Sequence[Sequence[float]],
    budget: int = config.SCALARIZATION_BUDGET,
    seed: int = 0,
) -> FrontList:
    """Solve every weight vector and keep the globally nondominated solutions."""
    if not len(grid):
        raise PreconditionError("weight grid is empty")
    objectives = ObjectiveSet(model, selection)

    def solve(weights: Sequence[float]) -> Optional[tuple[ScalarResult, np.ndarray]]:
        try:
            return scalarize_solve(model, selection, weights, poly, s, budget, seed), np.asarray(weights, dtype=float)
        except SparseFrontError as exc:
            logger.warning("scalarization failed for weights %s: %s", list(weights), exc)
            return None

    with ThreadPoolExecutor(max_workers=config.NUM_THREADS) as pool:
        solved = [item for item in pool.map(solve, grid) if item is not None]
    if not solved:
        return FrontList()
    points = [
        EvaluatedPoint(
            x=result.x,
            F=objectives.value(result.x),
            J=super_supports(result.x, s)[0],
            origin="scal",
            weights=tuple(float(w) for w in weights),
        )
        for result, weights in solved
    ]
    keep = nondominated_filter([p.F for p in points])
    front = FrontList.from_points(points[i] for i in keep)
    logger.info("scalarization: %d weights, %d points on %d supports", len(grid), len(front), len(front.supports()))
    return front
