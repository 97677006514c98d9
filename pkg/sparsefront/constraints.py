"""Convex constraint set Ω_c, feasibility checks and the sparse projections."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import config
from .exceptions import ConfigurationError, InfeasibleError, NumericalError
from .models import SupportSet, support_of
from .objectives import ObjectiveModel
from .qp import solve_qp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sector:
    indices: tuple[int, ...]
    min: float
    max: float


@dataclass(frozen=True)
class Turnover:
    x0: np.ndarray
    tau: float


@dataclass
class ConstraintSpec:
    """Bounds, beta window, sector limits and turnover budget on the weights.

    Attributes:
        lower: Per-asset minimum weights (non-negative)
        upper: Per-asset maximum weights (``inf`` for none)
        beta_window: Optional (beta_min, beta_max) on the portfolio beta
        sectors: Exposure limits on groups of assets
        turnover: Optional reference portfolio and total turnover budget
    """

    lower: np.ndarray
    upper: np.ndarray
    beta_window: Optional[tuple[float, float]] = None
    sectors: list[Sector] = field(default_factory=list)
    turnover: Optional[Turnover] = None

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.lower.shape[0]
        if self.upper.shape != (n,):
            raise ConfigurationError("lower and upper bounds differ in length")
        if np.any(self.lower < 0):
            raise ConfigurationError("lower bounds must be non-negative (no short selling)")
        if np.any(self.lower > self.upper):
            raise ConfigurationError("lower bounds exceed upper bounds")
        if self.lower.sum() > 1 + config.FEASIBILITY_TOL or self.upper.sum() < 1 - config.FEASIBILITY_TOL:
            raise ConfigurationError("bounds are incompatible with the budget constraint sum(x) = 1")
        if self.beta_window is not None:
            beta_min, beta_max = self.beta_window
            if not 0 <= beta_min <= beta_max:
                raise ConfigurationError(f"beta window must satisfy 0 <= min <= max, got {self.beta_window}")
        for sector in self.sectors:
            if sector.min > sector.max:
                raise ConfigurationError(f"sector {sector.indices}: min exceeds max")
            if any(not 0 <= i < n for i in sector.indices):
                raise ConfigurationError(f"sector {sector.indices}: index out of range")
        if self.turnover is not None:
            x0 = np.asarray(self.turnover.x0, dtype=float)
            if x0.shape != (n,) or self.turnover.tau < 0:
                raise ConfigurationError("turnover needs a reference portfolio of length n and tau >= 0")
            self.turnover = Turnover(x0, float(self.turnover.tau))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    @classmethod
    def simplex(cls, n: int) -> "ConstraintSpec":
        return cls(lower=np.zeros(n), upper=np.full(n, np.inf))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Ω_c as A_ub z ≤ b_ub, A_eq z = b_eq, lb ≤ z ≤ ub over z = (x, y).

    The auxiliary block y (turnover only) follows the n portfolio weights.
    """

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    n: int
    x0_turnover: Optional[np.ndarray] = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def var_dim(self) -> int:
        return self.lb.shape[0]

    @property
    def primal_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def box_only(self) -> bool:
        """True when Ω_c is the simplex intersected with bounds."""
        return self.A_ub.shape[0] == 0 and self.var_dim == self.n

    def lift(self, x: Sequence[float]) -> np.ndarray:
        """Extend portfolio weights with the smallest feasible auxiliary block."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] == self.var_dim:
            return x
        if self.x0_turnover is None:
            return x.copy()
        return np.concatenate([x, np.abs(x - self.x0_turnover)])


def _bound_pairs(lb: np.ndarray, ub: np.ndarray) -> list[tuple[float, Optional[float]]]:
    return [(float(lo), None if np.isinf(hi) else float(hi)) for lo, hi in zip(lb, ub)]


def build_polyhedron(spec: ConstraintSpec, model: Optional[ObjectiveModel] = None) -> Polyhedron:
    """Stack every linear row of Ω_c and certify that the region is nonempty."""
    beta = None if model is None else model.beta
    n = spec.n
    aux = n if spec.turnover is not None else 0
    dim = n + aux
    rows: list[np.ndarray] = []
    rhs: list[float] = []

    if spec.beta_window is not None:
        if beta is None:
            raise ConfigurationError("beta window requires asset betas in the model")
        beta_min, beta_max = spec.beta_window
        row = np.zeros(dim)
        row[:n] = beta
        rows += [-row, row.copy()]
        rhs += [-beta_min, beta_max]

    for sector in spec.sectors:
        row = np.zeros(dim)
        row[list(sector.indices)] = 1.0
        rows += [-row, row.copy()]
        rhs += [-sector.min, sector.max]

    if spec.turnover is not None:
        x0 = spec.turnover.x0
        eye = np.eye(n)
        # x - x0 <= y and x0 - x <= y
        upper_block = np.hstack([eye, -eye])
        lower_block = np.hstack([-eye, -eye])
        rows += list(upper_block) + list(lower_block)
        rhs += list(x0) + list(-x0)
        budget = np.zeros(dim)
        budget[n:] = 1.0
        rows.append(budget)
        rhs.append(spec.turnover.tau)

    A_ub = np.vstack(rows) if rows else np.zeros((0, dim))
    b_ub = np.asarray(rhs, dtype=float)
    A_eq = np.zeros((1, dim))
    A_eq[0, :n] = 1.0
    b_eq = np.ones(1)
    lb = np.concatenate([spec.lower, np.zeros(aux)])
    ub = np.concatenate([spec.upper, np.full(aux, np.inf)])

    result = linprog(
        np.zeros(dim),
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=_bound_pairs(lb, ub),
        method="highs",
    )
    if result.status != 0:
        raise InfeasibleError(f"constraint set is empty: feasibility LP returned '{result.message}'")

    logger.debug("built polyhedron: %d inequality rows, %d variables", A_ub.shape[0], dim)
    return Polyhedron(
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        lb=lb,
        ub=ub,
        n=n,
        x0_turnover=None if spec.turnover is None else spec.turnover.x0.copy(),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    row: int
    lhs: float
    rhs: float
    slack: float

    def __str__(self) -> str:
        return f"{self.kind}[{self.row}]: lhs={self.lhs:.6g} rhs={self.rhs:.6g} slack={self.slack:.3e}"


@dataclass
class FeasibilityReport:
    feasible: bool
    support: SupportSet
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.feasible

    def summary(self) -> str:
        if self.feasible:
            return "feasible"
        return "; ".join(str(v) for v in self.violations)


def is_feasible(
    x: Sequence[float],
    poly: Polyhedron,
    s: Optional[int] = None,
    tol: float = config.FEASIBILITY_TOL,
    support_tol: float = config.SUPPORT_TOL,
) -> FeasibilityReport:
    """Check every row of Ω_c and, when ``s`` is given, the cardinality bound."""
    x = np.asarray(x, dtype=float)
    z = poly.lift(x)
    violations: list[Violation] = []

    for i in range(poly.var_dim):
        if z[i] < poly.lb[i] - tol:
            violations.append(Violation("lower", i, float(z[i]), float(poly.lb[i]), float(z[i] - poly.lb[i])))
        if z[i] > poly.ub[i] + tol:
            violations.append(Violation("upper", i, float(z[i]), float(poly.ub[i]), float(poly.ub[i] - z[i])))

    lhs = poly.A_ub @ z
    for i in np.flatnonzero(lhs > poly.b_ub + tol):
        violations.append(Violation("inequality", int(i), float(lhs[i]), float(poly.b_ub[i]), float(poly.b_ub[i] - lhs[i])))

    lhs = poly.A_eq @ z
    for i in np.flatnonzero(np.abs(lhs - poly.b_eq) > tol):
        violations.append(Violation("equality", int(i), float(lhs[i]), float(poly.b_eq[i]), float(poly.b_eq[i] - lhs[i])))

    support = support_of(x[: poly.n], support_tol)
    if s is not None and len(support) > s:
        violations.append(Violation("cardinality", 0, float(len(support)), float(s), float(s - len(support))))

    return FeasibilityReport(feasible=not violations, support=support, violations=violations)


def sparse_project(u: Sequence[float], s: int) -> np.ndarray:
    """Projection onto {v >= 0, ||v||_0 <= s}: clip, then keep the s largest (lowest index on ties)."""
    v = np.maximum(np.asarray(u, dtype=float), 0.0)
    keep = np.argsort(-v, kind="stable")[:s]
    projected = np.zeros_like(v)
    projected[keep] = v[keep]
    return projected


def normalize_project(u: Sequence[float], s: int) -> np.ndarray:
    """Sparse projection rescaled onto the simplex; falls back to the basis vector at argmax(u)."""
    u = np.asarray(u, dtype=float)
    v = sparse_project(u, s)
    total = v.sum()
    if total > 0:
        return v / total
    fallback = np.zeros_like(u)
    fallback[int(np.argmax(u))] = 1.0
    return fallback


def support_feasible(poly: Polyhedron, support: SupportSet) -> bool:
    """Whether Ω_c contains a point vanishing outside ``support`` (memoised per polyhedron)."""
    support = tuple(sorted(support))
    cached = poly.cache.get(support)
    if cached is not None:
        return cached

    off = np.ones(poly.n, dtype=bool)
    off[list(support)] = False
    if poly.box_only:
        idx = list(support)
        feasible = bool(
            np.all(poly.lb[:poly.n][off] <= 0)
            and poly.lb[idx].sum() <= 1 + config.FEASIBILITY_TOL
            and poly.ub[idx].sum() >= 1 - config.FEASIBILITY_TOL
        )
    else:
        lb = poly.lb.copy()
        ub = poly.ub.copy()
        lb[: poly.n][off] = 0.0
        ub[: poly.n][off] = 0.0
        if np.any(poly.lb[: poly.n][off] > 0):
            feasible = False
        else:
            result = linprog(
                np.zeros(poly.var_dim),
                A_ub=poly.A_ub if poly.A_ub.shape[0] else None,
                b_ub=poly.b_ub if poly.A_ub.shape[0] else None,
                A_eq=poly.A_eq,
                b_eq=poly.b_eq,
                bounds=_bound_pairs(lb, ub),
                method="highs",
            )
            feasible = result.status == 0
    poly.cache[support] = feasible
    return feasible


def minimize_on_support(H: np.ndarray, g: np.ndarray, poly: Polyhedron, support: SupportSet) -> np.ndarray:
    """Minimise ½xᵀHx + gᵀx over Ω_c with x vanishing outside ``support``.

    ``H`` must be positive semi-definite on the support.
    """
    support = list(support)
    if not support_feasible(poly, tuple(support)):
        raise InfeasibleError(f"no point of the constraint set is supported on {tuple(support)}")
    n = poly.n
    x = np.zeros(n)
    if len(support) == 1 and poly.var_dim == n:
        x[support[0]] = 1.0
        return x

    cols = support + list(range(n, poly.var_dim))
    k, p = len(cols), len(support)
    Hk = np.zeros((k, k))
    Hk[:p, :p] = np.asarray(H, dtype=float)[np.ix_(support, support)]
    Hk[np.arange(p, k), np.arange(p, k)] = 1e-10
    gk = np.zeros(k)
    gk[:p] = np.asarray(g, dtype=float)[support]

    lb, ub = poly.lb[cols], poly.ub[cols]
    finite_ub = np.flatnonzero(np.isfinite(ub))
    A = np.vstack([poly.A_ub[:, cols], np.eye(k)[finite_ub], -np.eye(k)])
    b = np.concatenate([poly.b_ub, ub[finite_ub], -lb])

    try:
        solution = solve_qp(Hk, gk, A, b, poly.A_eq[:, cols], poly.b_eq)
    except NumericalError:
        logger.warning("restricted QP on support %s failed", tuple(support))
        raise
    x[support] = np.clip(solution.z[:p], poly.lb[support], poly.ub[support])
    return x


def project_onto_support(u: Sequence[float], poly: Polyhedron, support: SupportSet) -> np.ndarray:
    """Euclidean projection of ``u`` onto Ω_c restricted to ``support``."""
    u = np.asarray(u, dtype=float)
    return minimize_on_support(np.eye(poly.n), -u, poly, support)
