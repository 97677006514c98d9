"""NSGA-II with sparse repair and its memetic variant NSMA."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import config
from .constraints import Polyhedron, is_feasible, normalize_project
from .descent import iterative_hard_thresholding
from .exceptions import ConfigurationError, NumericalError, SparseFrontError
from .models import crowding_distance, dominance_matrix
from .objectives import ObjectiveModel, ObjectiveSet, ObjectiveTerm, default_lipschitz
from .seeding import make_rng

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-8


@dataclass
class GaParams:
    """Genetic operators and budgets; ``mutation_prob`` defaults to 1/n."""

    pop_size: int = 100
    crossover_prob: float = 0.9
    mutation_prob: Optional[float] = None
    eta_c: float = 20.0
    eta_m: float = 20.0
    seed: int = 0
    generations: Optional[int] = None
    time_budget: Optional[float] = config.PHASE1_BUDGET

    def __post_init__(self) -> None:
        if self.pop_size < 2:
            raise ConfigurationError("population size must be at least 2")
        for name in ("crossover_prob", "mutation_prob"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if self.generations is None and self.time_budget is None:
            raise ConfigurationError("genetic search needs a generation cap or a time budget")


@dataclass
class Population:
    X: np.ndarray
    F: np.ndarray
    violation: np.ndarray
    rank: np.ndarray
    crowding: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def evaluate(cls, X: np.ndarray, objectives: ObjectiveSet, poly: Polyhedron) -> "Population":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.empty((X.shape[0], objectives.m))
        violation = np.empty(X.shape[0])
        for i, x in enumerate(X):
            violation[i] = constraint_violation(x, poly)
            try:
                F[i] = objectives.value(x)
            except NumericalError:
                F[i] = np.inf
                violation[i] = np.inf
        rank, crowding = rank_and_crowd(F, violation)
        return cls(X, F, violation, rank, crowding)

    def best(self) -> np.ndarray:
        """Indices of feasible rank-0 members."""
        return np.flatnonzero((self.rank == 0) & (self.violation <= VIOLATION_TOL))


def constraint_violation(x: np.ndarray, poly: Polyhedron) -> float:
    """Total violation of the linear rows and bounds of Ω_c."""
    z = poly.lift(x)
    total = float(np.sum(np.maximum(poly.A_ub @ z - poly.b_ub, 0.0)))
    total += float(np.sum(np.abs(poly.A_eq @ z - poly.b_eq)))
    total += float(np.sum(np.maximum(poly.lb - z, 0.0)))
    upper = np.isfinite(poly.ub)
    total += float(np.sum(np.maximum(z[upper] - poly.ub[upper], 0.0)))
    return total


def constrained_dominance(F: np.ndarray, violation: np.ndarray) -> np.ndarray:
    """Feasible beats infeasible, infeasible pairs compare by violation, feasible pairs by Pareto dominance."""
    feasible = violation <= VIOLATION_TOL
    D = dominance_matrix(F) & feasible[:, None] & feasible[None, :]
    D |= feasible[:, None] & ~feasible[None, :]
    D |= ~feasible[:, None] & ~feasible[None, :] & (violation[:, None] < violation[None, :])
    return D


def fast_nondominated_sort(D: np.ndarray) -> list[list[int]]:
    """Fronts of a dominance matrix, best first."""
    count = D.sum(axis=0)
    fronts = [[int(i) for i in np.flatnonzero(count == 0)]]
    while fronts[-1]:
        following = []
        for p in fronts[-1]:
            for q in np.flatnonzero(D[p]):
                count[q] -= 1
                if count[q] == 0:
                    following.append(int(q))
        fronts.append(sorted(following))
    return fronts[:-1]


def rank_and_crowd(F: np.ndarray, violation: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rank = np.zeros(F.shape[0], dtype=int)
    crowding = np.zeros(F.shape[0])
    for level, front in enumerate(fast_nondominated_sort(constrained_dominance(F, violation))):
        rank[front] = level
        crowding[front] = crowding_distance(F[front])
    return rank, crowding


def initial_population(n: int, s: int, poly: Polyhedron, seed: int) -> np.ndarray:
    """The n basis vectors followed by n random s-sparse simplex points."""
    rng = make_rng(seed, "initial-population")
    members = [np.eye(n)[i] for i in range(n)]
    for _ in range(n):
        support = np.sort(rng.choice(n, size=s, replace=False))
        x = np.zeros(n)
        x[support] = rng.dirichlet(np.ones(s))
        members.append(normalize_project(x, s))
    X = np.vstack(members)
    infeasible = sum(not is_feasible(x, poly, s) for x in X)
    if infeasible:
        logger.info("%d of %d initial members violate linear rows", infeasible, len(X))
    return X


def _tournament(population: Population, rng: np.random.Generator) -> int:
    a, b = rng.integers(len(population), size=2)
    key_a = (population.rank[a], -population.crowding[a])
    key_b = (population.rank[b], -population.crowding[b])
    return int(a if key_a <= key_b else b)


def _sbx(p1: np.ndarray, p2: np.ndarray, params: GaParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    u = rng.random(p1.shape[0])
    cross = rng.random() < params.crossover_prob
    if not cross:
        return p1.copy(), p2.copy()
    exponent = 1.0 / (params.eta_c + 1.0)
    beta = np.where(u <= 0.5, (2.0 * u) ** exponent, (1.0 / (2.0 * (1.0 - u))) ** exponent)
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    return np.clip(c1, 0.0, 1.0), np.clip(c2, 0.0, 1.0)


def _polynomial_mutation(x: np.ndarray, rate: float, params: GaParams, rng: np.random.Generator) -> np.ndarray:
    mutate = rng.random(x.shape[0]) < rate
    u = rng.random(x.shape[0])
    exponent = 1.0 / (params.eta_m + 1.0)
    delta = np.where(u < 0.5, (2.0 * u) ** exponent - 1.0, 1.0 - (2.0 * (1.0 - u)) ** exponent)
    return np.clip(np.where(mutate, x + delta, x), 0.0, 1.0)


def _truncate(population: Population, size: int) -> np.ndarray:
    """Elitist survivor indices: whole fronts, the last one cut by descending crowding."""
    survivors: list[int] = []
    for level in range(int(population.rank.max()) + 1):
        front = np.flatnonzero(population.rank == level)
        if len(survivors) + len(front) <= size:
            survivors.extend(int(i) for i in front)
            continue
        order = np.argsort(-population.crowding[front], kind="stable")
        survivors.extend(int(i) for i in front[order[: size - len(survivors)]])
        break
    return np.array(survivors, dtype=int)


Refinement = Callable[[np.ndarray, int], np.ndarray]


class GeneticSolver:
    """Generational NSGA-II loop; ``refine`` optionally improves offspring (NSMA)."""

    def __init__(
        self,
        objectives: ObjectiveSet,
        poly: Polyhedron,
        s: int,
        params: GaParams,
        refine: Optional[Refinement] = None,
    ):
        self.objectives = objectives
        self.poly = poly
        self.s = s
        self.params = params
        self.refine = refine
        self.generations = 0

    def _offspring(self, population: Population, rng: np.random.Generator) -> np.ndarray:
        n = self.poly.n
        rate = self.params.mutation_prob if self.params.mutation_prob is not None else 1.0 / n
        children = []
        while len(children) < self.params.pop_size:
            p1 = population.X[_tournament(population, rng)]
            p2 = population.X[_tournament(population, rng)]
            for child in _sbx(p1, p2, self.params, rng):
                child = _polynomial_mutation(child, rate, self.params, rng)
                children.append(normalize_project(child, self.s))
        return np.vstack(children[: self.params.pop_size])

    def run(self, X0: Optional[np.ndarray] = None) -> Population:
        params = self.params
        rng = make_rng(params.seed, "genetic-operators")
        if X0 is None:
            X0 = initial_population(self.poly.n, self.s, self.poly, params.seed)
        population = Population.evaluate(X0, self.objectives, self.poly)
        started = time.monotonic()
        self.generations = 0
        while True:
            if params.generations is not None and self.generations >= params.generations:
                break
            if params.time_budget is not None and time.monotonic() - started >= params.time_budget:
                break
            self.generations += 1
            children = self._offspring(population, rng)
            if self.refine is not None:
                children = self.refine(children, self.generations)
            merged = Population.evaluate(np.vstack([population.X, children]), self.objectives, self.poly)
            keep = _truncate(merged, params.pop_size)
            population = Population.evaluate(merged.X[keep], self.objectives, self.poly)
            logger.debug("generation %d: %d rank-0 members", self.generations, int(np.sum(population.rank == 0)))
        logger.info("genetic search stopped after %d generations, %d members", self.generations, len(population))
        return population


def nsga2_run(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    poly: Polyhedron,
    s: int,
    params: Optional[GaParams] = None,
    X0: Optional[np.ndarray] = None,
) -> Population:
    objectives = ObjectiveSet(model, selection)
    return GeneticSolver(objectives, poly, s, params or GaParams()).run(X0)


def nsma_run(
    model: ObjectiveModel,
    selection: Sequence[ObjectiveTerm],
    poly: Polyhedron,
    s: int,
    params: Optional[GaParams] = None,
    refine_every: int = 1,
    refine_steps: int = 5,
    L: Optional[float] = None,
    X0: Optional[np.ndarray] = None,
) -> Population:
    """NSGA-II whose offspring take ``refine_steps`` MOIHT iterations every ``refine_every`` generations."""
    if refine_every < 1 or refine_steps < 0:
        raise ConfigurationError("refine_every must be >= 1 and refine_steps >= 0")
    objectives = ObjectiveSet(model, selection)
    if refine_steps == 0:
        return GeneticSolver(objectives, poly, s, params or GaParams()).run(X0)
    L = default_lipschitz(objectives) if L is None else L

    def refine(children: np.ndarray, generation: int) -> np.ndarray:
        if generation % refine_every:
            return children
        refined = children.copy()
        for i, child in enumerate(children):
            if not is_feasible(child, poly, s):
                continue
            try:
                refined[i] = iterative_hard_thresholding(objectives, child, poly, s, L, max_iter=refine_steps).x
            except SparseFrontError as exc:
                logger.debug("refinement skipped: %s", exc)
        return refined

    return GeneticSolver(objectives, poly, s, params or GaParams(), refine).run(X0)
