"""Direction subproblems: constrained common/partial steepest descent and L-stationarity.

Each subproblem has the form

    min_d  max_j G_j d + (L/2)||d||²   s.t.  x + d ∈ Ω_c,  d_i fixed off the free set

and is solved through its epigraph QP in (d, t).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from . import config
from .constraints import Polyhedron, is_feasible, support_feasible
from .exceptions import PreconditionError
from .models import SupportSet, support_of, super_supports
from .qp import solve_qp

logger = logging.getLogger(__name__)

STATIONARY_SLACK = 1e-13
TIE_TOL = 1e-12
# Feasibility slack accepted on incoming anchors (iterates drift by rounding)
ANCHOR_TOL = 1e-6
# Quadratic weight on auxiliary turnover variables, which carry no objective
AUX_REG = 1e-10


@dataclass
class DirectionResult:
    """Optimal value theta and primal direction v of a direction subproblem."""

    theta: float
    v: np.ndarray
    status: str
    support: SupportSet = ()
    exact: bool = True


@dataclass
class QPProblem:
    """Anchored min-max direction problem.

    Attributes:
        G: Gradient rows (m x n) entering the max
        anchor: Feasible point the direction starts from
        poly: Constraint set the displaced point must stay in
        free: Boolean mask of coordinates the QP may move
        L: Weight of the proximal term
        fixed: Prescribed displacement of the coordinates outside ``free``
    """

    G: np.ndarray
    anchor: np.ndarray
    poly: Polyhedron
    free: np.ndarray
    L: float = 1.0
    fixed: Optional[np.ndarray] = None
    support: SupportSet = field(default=())


def _theta(G: np.ndarray, d: np.ndarray, L: float) -> float:
    return float(np.max(G @ d) + 0.5 * L * d @ d)


def _clip_to_bounds(x: np.ndarray, d: np.ndarray, poly: Polyhedron) -> np.ndarray:
    n = poly.n
    target = np.clip(x + d, poly.lb[:n], poly.ub[:n])
    return target - x


def solve_minmax_qp(problem: QPProblem) -> DirectionResult:
    """Solve one anchored min-max subproblem.

    When the fixed displacement is zero, d = 0 is feasible and a theta within
    ``STATIONARY_SLACK`` of zero is reported as exactly stationary.
    """
    poly = problem.poly
    n = poly.n
    G = np.atleast_2d(np.asarray(problem.G, dtype=float))
    m = G.shape[0]
    x = np.asarray(problem.anchor, dtype=float)[:n]
    free = np.asarray(problem.free, dtype=bool)
    fixed = np.zeros(n) if problem.fixed is None else np.where(free, 0.0, problem.fixed)
    anchored = not np.any(fixed)

    base = x + fixed
    base_z = poly.lift(base)
    idx = np.flatnonzero(free)
    aux = poly.var_dim - n
    offsets = G @ fixed

    if idx.size == 1 and aux == 0:
        # The budget row pins the single free coordinate
        d = fixed.copy()
        d[idx[0]] = 1.0 - base.sum()
        report = is_feasible(x + d, poly, tol=ANCHOR_TOL)
        if not report:
            return DirectionResult(math.inf, np.zeros(n), "infeasible", problem.support)
        d = _clip_to_bounds(x, d, poly)
    elif idx.size == 0:
        d = fixed.copy()
    else:
        k = idx.size
        cols = list(idx) + list(range(n, n + aux))
        size = k + aux + 1
        H = np.zeros((size, size))
        H[np.arange(k), np.arange(k)] = problem.L
        H[np.arange(k, k + aux), np.arange(k, k + aux)] = AUX_REG
        g = np.zeros(size)
        g[-1] = 1.0

        # max_j rows: G_j d - t <= -offset_j
        objective_rows = np.zeros((m, size))
        objective_rows[:, :k] = G[:, idx]
        objective_rows[:, -1] = -1.0
        blocks = [objective_rows]
        rhs = [-offsets]

        if poly.A_ub.shape[0]:
            coeffs = np.zeros((poly.A_ub.shape[0], size))
            coeffs[:, : k + aux] = poly.A_ub[:, cols]
            slack = poly.b_ub - poly.A_ub @ base_z
            nonzero = np.any(coeffs != 0, axis=1)
            blocks.append(coeffs[nonzero])
            rhs.append(slack[nonzero])

        lb, ub = poly.lb[cols], poly.ub[cols]
        start = base_z[cols]
        eye = np.eye(size)[: k + aux]
        finite = np.flatnonzero(np.isfinite(ub))
        blocks += [eye[finite], -eye]
        rhs += [ub[finite] - start[finite], start - lb]

        E = np.zeros((poly.A_eq.shape[0], size))
        E[:, : k + aux] = poly.A_eq[:, cols]
        e = poly.b_eq - poly.A_eq @ base_z

        solution = solve_qp(H, g, np.vstack(blocks), np.concatenate(rhs), E, e)
        d = fixed.copy()
        d[idx] = solution.z[:k]
        d = _clip_to_bounds(x, d, poly)
        d[~free] = fixed[~free]

    theta = _theta(G, d, problem.L)
    if anchored and theta >= -STATIONARY_SLACK:
        return DirectionResult(0.0, np.zeros(n), "stationary", problem.support)
    return DirectionResult(theta, d, "optimal", problem.support)


def _mask(n: int, J: Sequence[int]) -> np.ndarray:
    free = np.zeros(n, dtype=bool)
    free[list(J)] = True
    return free


def _check_anchor(x: np.ndarray, J: Sequence[int], poly: Polyhedron) -> None:
    report = is_feasible(x, poly, tol=ANCHOR_TOL)
    if not report:
        raise PreconditionError(f"direction anchor is infeasible: {report.summary()}")
    if not set(report.support) <= set(J):
        raise PreconditionError(f"support {report.support} of the anchor is not contained in {tuple(J)}")


def common_direction(
    x: Sequence[float],
    J: SupportSet,
    grads: np.ndarray,
    poly: Polyhedron,
    L: float = 1.0,
) -> DirectionResult:
    """Constrained steepest common descent direction in the subspace of ``J``."""
    x = np.asarray(x, dtype=float)
    _check_anchor(x, J, poly)
    problem = QPProblem(G=grads, anchor=poly.lift(x), poly=poly, free=_mask(poly.n, J), L=L, support=tuple(J))
    return solve_minmax_qp(problem)


def partial_direction(
    z: Sequence[float],
    J: SupportSet,
    grads: np.ndarray,
    I: Sequence[int],
    poly: Polyhedron,
) -> DirectionResult:
    """Common direction restricted to the objective subset ``I``."""
    if len(I) == 0:
        raise PreconditionError("objective subset must be nonempty")
    grads = np.atleast_2d(grads)
    return common_direction(z, J, grads[list(I)], poly)


def _candidate_pool(x: np.ndarray, L: float, grads: np.ndarray, s: int, budget: int) -> list[SupportSet]:
    n = x.shape[0]
    pool = list(super_supports(x, s))
    seen = set(pool)

    def extend(indices: set[int]) -> None:
        for J in combinations(sorted(indices), s):
            if len(pool) >= budget:
                return
            if J not in seen:
                seen.add(J)
                pool.append(J)

    # Weights are nonnegative, so the largest entries of the gradient step rank first
    ranked = {int(i) for i in np.argsort(-(x - grads.mean(axis=0) / L), kind="stable")[: min(2 * s, n)]}
    extend(ranked)
    for g in grads:
        ranked.update(int(i) for i in np.argsort(-(x - g / L), kind="stable")[: min(s, n)])
    extend(ranked)
    return pool


def l_stationary_direction(
    x: Sequence[float],
    L: float,
    grads: np.ndarray,
    poly: Polyhedron,
    s: int,
    budget: int = config.ENUMERATION_BUDGET,
) -> DirectionResult:
    """Best direction over all (or a pool of) supports of size s.

    Exact when C(n, s) <= ``budget``; otherwise the result is labelled
    ``approximate-L-stationary``. Ties keep the lexicographically smallest support.
    """
    x = np.asarray(x, dtype=float)
    n = poly.n
    if L <= 0:
        raise PreconditionError(f"L must be positive, got {L}")
    if len(support_of(x)) > s:
        raise PreconditionError(f"anchor has more than {s} nonzero weights")
    _check_anchor(x, tuple(range(n)), poly)
    grads = np.atleast_2d(np.asarray(grads, dtype=float))

    exact = math.comb(n, s) <= budget
    if exact:
        candidates: list[SupportSet] = list(combinations(range(n), s))
    else:
        candidates = sorted(_candidate_pool(x, L, grads, s, budget))
        logger.warning("approximate-L-stationary: searching %d of C(%d, %d) supports", len(candidates), n, s)

    anchor = poly.lift(x)
    best: Optional[DirectionResult] = None
    for J in candidates:
        if not support_feasible(poly, J):
            continue
        free = _mask(n, J)
        problem = QPProblem(G=grads, anchor=anchor, poly=poly, free=free, L=L, fixed=np.where(free, 0.0, -x), support=J)
        result = solve_minmax_qp(problem)
        if result.status == "infeasible":
            continue
        if best is None or result.theta < best.theta - TIE_TOL:
            best = result

    if best is None:
        return DirectionResult(0.0, np.zeros(n), "infeasible", (), exact)
    if best.theta >= -STATIONARY_SLACK:
        return DirectionResult(0.0, np.zeros(n), "stationary", super_supports(x, s)[0], exact)
    best.exact = exact
    if not exact:
        best.status = "approximate-L-stationary"
    return best
