"""Core value types: supports, evaluated points, dominance and the per-support front list."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import TYPE_CHECKING, Iterable, Iterator, Optional, Sequence

import numpy as np

from . import config
from .exceptions import ConfigurationError, InfeasibleError, PreconditionError

if TYPE_CHECKING:
    from .constraints import ConstraintSpec
    from .objectives import ObjectiveModel, ObjectiveTerm

logger = logging.getLogger(__name__)

# Sorted tuple of 0-based asset indices
SupportSet = tuple[int, ...]


class Dominance(str, Enum):
    DOMINATES = "dominates"
    DOMINATED = "dominated"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


@dataclass
class ProblemInstance:
    """A sparse multi-objective portfolio problem.

    Attributes:
        name: Instance label used in file names and reports
        n: Number of assets
        s: Cardinality bound, 1 <= s < n
        objectives: Ordered objective terms (id, scale, orientation)
        constraints: Convex constraints on the weights
        model: Estimated market parameters
    """

    name: str
    n: int
    s: int
    objectives: list[ObjectiveTerm]
    constraints: ConstraintSpec
    model: ObjectiveModel

    def __post_init__(self) -> None:
        if not 1 <= self.s < self.n:
            raise ConfigurationError(f"cardinality bound must satisfy 1 <= s < n, got s={self.s}, n={self.n}")
        if not self.objectives:
            raise ConfigurationError("at least one objective must be selected")
        if any(term.scale <= 0 for term in self.objectives):
            raise ConfigurationError("objective scale factors must be strictly positive")

    @property
    def m(self) -> int:
        return len(self.objectives)


@dataclass(frozen=True, eq=False)
class EvaluatedPoint:
    """A weight vector with its (minimisation-convention) objective vector and super support.

    Equality is identity: two points with equal coordinates are still distinct entries.
    """

    x: np.ndarray
    F: np.ndarray
    J: SupportSet
    theta: float = math.nan
    origin: str = ""
    weights: Optional[tuple[float, ...]] = None
    key: int = -1

    def check(self, s: int, tol: float = config.SUPPORT_TOL) -> None:
        if len(self.J) != s:
            raise InfeasibleError(f"super support {self.J} does not have exactly {s} indices")
        if not set(support_of(self.x, tol)) <= set(self.J):
            raise InfeasibleError(f"support of x is not contained in {self.J}")


def support_of(x: Sequence[float], tol: float = config.SUPPORT_TOL) -> SupportSet:
    """Indices of components whose magnitude exceeds ``tol``."""
    x = np.asarray(x, dtype=float)
    return tuple(int(i) for i in np.flatnonzero(np.abs(x) > tol))


def super_supports(x: Sequence[float], s: int, tol: float = config.SUPPORT_TOL) -> list[SupportSet]:
    """All s-element index sets containing the support of ``x``, in lexicographic order.

    Beyond ``config.SUPER_SUPPORT_CAP`` completions only the one padded with the
    smallest-index zeros is returned.
    """
    x = np.asarray(x, dtype=float)
    active = support_of(x, tol)
    if len(active) > s:
        raise InfeasibleError(f"support of size {len(active)} exceeds cardinality bound {s}")
    active_set = set(active)
    zeros = [i for i in range(len(x)) if i not in active_set]
    missing = s - len(active)
    if math.comb(len(zeros), missing) > config.SUPER_SUPPORT_CAP:
        logger.warning(
            "super support enumeration truncated: C(%d, %d) completions exceed cap %d",
            len(zeros), missing, config.SUPER_SUPPORT_CAP,
        )
        return [tuple(sorted(active_set.union(zeros[:missing])))]
    return sorted(tuple(sorted(active_set.union(extra))) for extra in combinations(zeros, missing))


def compare(Fa: Sequence[float], Fb: Sequence[float]) -> Dominance:
    """Pareto relation of ``Fa`` with respect to ``Fb`` (minimisation)."""
    a = np.asarray(Fa, dtype=float)
    b = np.asarray(Fb, dtype=float)
    if a.shape != b.shape:
        raise PreconditionError(f"objective vectors differ in length: {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        return Dominance.EQUAL
    if np.all(a <= b):
        return Dominance.DOMINATES
    if np.all(b <= a):
        return Dominance.DOMINATED
    return Dominance.INCOMPARABLE


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """Boolean matrix D with D[i, j] true when row i strictly dominates row j."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_filter(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices (in input order) of the points no other point strictly dominates."""
    F = np.asarray(points, dtype=float)
    if F.size == 0:
        raise PreconditionError("cannot filter an empty set of points")
    if F.ndim == 1:
        F = F[:, None]
    dominated = dominance_matrix(F).any(axis=0)
    return [int(i) for i in np.flatnonzero(~dominated)]


def crowding_distance(front: Sequence[Sequence[float]]) -> np.ndarray:
    """NSGA-II crowding distance; boundary points of each objective get infinity."""
    F = np.asarray(front, dtype=float)
    k = F.shape[0]
    if k < 2:
        return np.full(k, np.inf)
    distance = np.zeros(k)
    for j in range(F.shape[1]):
        order = np.argsort(F[:, j], kind="stable")
        distance[order[0]] = distance[order[-1]] = np.inf
        span = F[order[-1], j] - F[order[0], j]
        if not np.isfinite(span) or span <= 0:
            continue
        distance[order[1:-1]] += (F[order[2:], j] - F[order[:-2], j]) / span
    return distance


@dataclass
class FrontList:
    """Evaluated points grouped by super support, mutually nondominated inside each group.

    Single writer. An incoming point equal to or dominated by a same-support entry is
    rejected; entries it dominates are dropped.
    """

    _groups: dict[SupportSet, list[EvaluatedPoint]] = field(default_factory=dict)

    @classmethod
    def from_points(cls, points: Iterable[EvaluatedPoint]) -> "FrontList":
        front = cls()
        for point in points:
            front.insert(point)
        return front

    def insert(self, point: EvaluatedPoint) -> bool:
        group = self._groups.setdefault(point.J, [])
        for entry in group:
            if compare(entry.F, point.F) in (Dominance.DOMINATES, Dominance.EQUAL):
                return False
        group[:] = [entry for entry in group if compare(point.F, entry.F) is not Dominance.DOMINATES]
        group.append(point)
        return True

    def remove(self, point: EvaluatedPoint) -> None:
        group = self._groups.get(point.J, [])
        group[:] = [entry for entry in group if entry is not point]
        if not group:
            self._groups.pop(point.J, None)

    def group(self, J: SupportSet) -> list[EvaluatedPoint]:
        return list(self._groups.get(J, []))

    def supports(self) -> list[SupportSet]:
        return sorted(J for J, group in self._groups.items() if group)

    def points(self) -> list[EvaluatedPoint]:
        return [point for J in self.supports() for point in self._groups[J]]

    def sorted_points(self) -> list[EvaluatedPoint]:
        """Points ordered by support, then by first objective."""
        return sorted(self.points(), key=lambda p: (p.J, float(p.F[0]), tuple(p.F)))

    def objective_matrix(self) -> np.ndarray:
        points = self.points()
        if not points:
            return np.empty((0, 0))
        return np.vstack([p.F for p in points])

    def copy(self) -> "FrontList":
        return FrontList({J: list(group) for J, group in self._groups.items() if group})

    def __contains__(self, point: object) -> bool:
        if not isinstance(point, EvaluatedPoint):
            return False
        return any(entry is point for entry in self._groups.get(point.J, []))

    def __iter__(self) -> Iterator[EvaluatedPoint]:
        return iter(self.points())

    def __len__(self) -> int:
        return sum(len(group) for group in self._groups.values())
