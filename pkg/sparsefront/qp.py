"""Dense convex QP engine used by every direction subproblem and projection.

Solves

    minimise    ½ zᵀHz + gᵀz
    subject to  A z ≤ b,  E z = e

with a Mehrotra predictor-corrector primal-dual interior point method. When the
interior point iteration fails the problem is retried once with SLSQP.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import minimize

from . import config
from .exceptions import NumericalError

logger = logging.getLogger(__name__)

# Fraction of the distance to the boundary taken by each step
STEP_FRACTION = 0.995
# Dual regularisation of the equality block
EQUALITY_REG = 1e-12


@dataclass
class QPSolution:
    z: np.ndarray
    objective: float
    iterations: int
    residual: float
    method: str


class _KKTSystem:
    """One LU factorisation of the reduced KKT matrix, reused for predictor and corrector."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            try:
                self.factors = lu_factor(matrix, check_finite=True)
            except (ValueError, np.linalg.LinAlgError):
                self.factors = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.factors is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                solution = lu_solve(self.factors, rhs)
            if np.all(np.isfinite(solution)):
                return solution
        solution = np.linalg.lstsq(self.matrix, rhs, rcond=None)[0]
        if not np.all(np.isfinite(solution)):
            raise NumericalError("KKT system could not be solved")
        return solution


def _max_step(values: np.ndarray, steps: np.ndarray) -> float:
    negative = steps < 0
    if not np.any(negative):
        return 1.0
    return float(min(1.0, np.min(-values[negative] / steps[negative])))


def _interior_point(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    E: np.ndarray,
    e: np.ndarray,
    tol: float,
    max_iter: int,
) -> QPSolution:
    k, p, q = g.shape[0], A.shape[0], E.shape[0]

    if p == 0:
        kkt = np.block([[H, E.T], [E, -EQUALITY_REG * np.eye(q)]])
        solution = _KKTSystem(kkt).solve(np.concatenate([-g, e]))
        z = solution[:k]
        residual = float(np.max(np.abs(E @ z - e), initial=0.0))
        return QPSolution(z, float(0.5 * z @ H @ z + g @ z), 1, residual, "interior-point")

    z = np.zeros(k)
    s = np.ones(p)
    lam = np.ones(p)
    nu = np.zeros(q)
    scale_d = 1.0 + np.max(np.abs(g), initial=0.0)
    scale_p = 1.0 + max(np.max(np.abs(b), initial=0.0), np.max(np.abs(e), initial=0.0))

    for iteration in range(1, max_iter + 1):
        rd = H @ z + g + A.T @ lam + E.T @ nu
        re = E @ z - e
        ri = A @ z + s - b
        mu = float(s @ lam) / p

        residual = max(
            np.max(np.abs(rd)) / scale_d,
            np.max(np.abs(re), initial=0.0) / scale_p,
            np.max(np.abs(ri)) / scale_p,
        )
        if residual <= tol and mu <= tol:
            return QPSolution(z, float(0.5 * z @ H @ z + g @ z), iteration, float(residual), "interior-point")

        w = lam / s
        kkt = np.block([
            [H + A.T @ (w[:, None] * A), E.T],
            [E, -EQUALITY_REG * np.eye(q)],
        ])
        system = _KKTSystem(kkt)

        def newton_step(rc: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
            rhs = np.concatenate([-rd - A.T @ ((lam * ri - rc) / s), -re])
            solution = system.solve(rhs)
            dz, dnu = solution[:k], solution[k:]
            Adz = A @ dz
            ds = -ri - Adz
            dlam = (-rc + lam * ri) / s + w * Adz
            return dz, dnu, ds, dlam

        # Predictor
        dz, dnu, ds, dlam = newton_step(s * lam)
        alpha_aff = min(_max_step(s, ds), _max_step(lam, dlam))
        mu_aff = float((s + alpha_aff * ds) @ (lam + alpha_aff * dlam)) / p
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # Corrector
        dz, dnu, ds, dlam = newton_step(s * lam + ds * dlam - sigma * mu)
        alpha = STEP_FRACTION * min(_max_step(s, ds), _max_step(lam, dlam))
        alpha = min(alpha, 1.0)

        z = z + alpha * dz
        nu = nu + alpha * dnu
        s = s + alpha * ds
        lam = lam + alpha * dlam

        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(lam))):
            raise NumericalError(f"interior point iterates diverged at iteration {iteration}")
        logger.debug("qp iteration %d: residual=%.3e mu=%.3e alpha=%.3f", iteration, residual, mu, alpha)

    raise NumericalError(
        f"interior point did not converge in {max_iter} iterations "
        f"(dual={np.max(np.abs(rd)):.3e}, primal={np.max(np.abs(ri)):.3e}, gap={mu:.3e})"
    )


def _slsqp(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    E: np.ndarray,
    e: np.ndarray,
    tol: float,
) -> QPSolution:
    constraints = []
    if A.shape[0]:
        constraints.append({"type": "ineq", "fun": lambda z: b - A @ z, "jac": lambda z: -A})
    if E.shape[0]:
        constraints.append({"type": "eq", "fun": lambda z: E @ z - e, "jac": lambda z: E})
    result = minimize(
        lambda z: 0.5 * z @ H @ z + g @ z,
        np.zeros(g.shape[0]),
        jac=lambda z: H @ z + g,
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": 500, "ftol": 1e-12},
    )
    z = result.x
    violation = max(
        np.max(A @ z - b, initial=0.0),
        np.max(np.abs(E @ z - e), initial=0.0),
    )
    if not result.success and violation > 1e-6:
        raise NumericalError(f"SLSQP fallback failed: {result.message} (violation {violation:.3e})")
    return QPSolution(z, float(result.fun), int(result.nit), float(violation), "slsqp")


def solve_qp(
    H: np.ndarray,
    g: np.ndarray,
    A: Optional[np.ndarray] = None,
    b: Optional[np.ndarray] = None,
    E: Optional[np.ndarray] = None,
    e: Optional[np.ndarray] = None,
    tol: float = config.QP_TOL,
    max_iter: int = config.QP_MAX_ITER,
) -> QPSolution:
    """Solve a convex QP; raises NumericalError when both solvers fail."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    g = np.asarray(g, dtype=float)
    k = g.shape[0]
    A = np.zeros((0, k)) if A is None else np.asarray(A, dtype=float).reshape(-1, k)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).ravel()
    E = np.zeros((0, k)) if E is None else np.asarray(E, dtype=float).reshape(-1, k)
    e = np.zeros(0) if e is None else np.asarray(e, dtype=float).ravel()
    try:
        return _interior_point(H, g, A, b, E, e, tol, max_iter)
    except NumericalError as exc:
        logger.warning("interior point QP failed (%s); falling back to SLSQP", exc)
        return _slsqp(H, g, A, b, E, e, tol)
