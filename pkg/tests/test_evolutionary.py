"""Tests for NSGA-II machinery and the NSMA memetic variant."""

import numpy as np
import pytest

from sparsefront.constraints import ConstraintSpec, Polyhedron, Sector, build_polyhedron, is_feasible
from sparsefront.evolutionary import (
    GaParams,
    constrained_dominance,
    constraint_violation,
    fast_nondominated_sort,
    initial_population,
    nsga2_run,
    nsma_run,
)
from sparsefront.exceptions import ConfigurationError
from sparsefront.models import ProblemInstance
from sparsefront.synthetic import make_mean_variance_instance


@pytest.mark.unit
class TestGaParams:
    """Test suite for genetic parameter validation."""

    def test_population_of_one_is_rejected(self) -> None:
        """Test at least two members are needed."""
        with pytest.raises(ConfigurationError):
            GaParams(pop_size=1)

    def test_needs_a_budget(self) -> None:
        """Test a run needs a generation cap or a time budget."""
        with pytest.raises(ConfigurationError):
            GaParams(generations=None, time_budget=None)

    def test_mutation_probability_range(self) -> None:
        """Test probabilities outside [0, 1] are rejected."""
        with pytest.raises(ConfigurationError):
            GaParams(mutation_prob=1.5)


@pytest.mark.unit
class TestRanking:
    """Test suite for constrained domination and nondominated sorting."""

    def test_feasible_beats_infeasible(self) -> None:
        """Test a feasible point dominates an infeasible one regardless of objectives."""
        F = np.array([[5.0, 5.0], [0.0, 0.0]])
        violation = np.array([0.0, 0.3])

        D = constrained_dominance(F, violation)

        assert D[0, 1] and not D[1, 0]

    def test_infeasible_pairs_compare_by_violation(self) -> None:
        """Test the smaller violation wins between infeasible points."""
        F = np.array([[0.0, 0.0], [5.0, 5.0]])
        violation = np.array([0.5, 0.1])

        D = constrained_dominance(F, violation)

        assert D[1, 0] and not D[0, 1]

    def test_fronts(self) -> None:
        """Test sorting splits points into successive nondominated layers."""
        F = np.array([[1.0, 1.0], [2.0, 2.0], [0.0, 3.0], [3.0, 3.0]])
        D = constrained_dominance(F, np.zeros(4))

        assert fast_nondominated_sort(D) == [[0, 2], [1], [3]]

    def test_constraint_violation(self, toy_poly: Polyhedron) -> None:
        """
        Test violation sums budget and bound excesses.

        Args:
            toy_poly: Toy polyhedron fixture
        """
        assert constraint_violation(np.array([1.0, 0.0, 0.0]), toy_poly) == 0.0
        assert constraint_violation(np.array([0.6, 0.6, -0.1]), toy_poly) == pytest.approx(0.2)


@pytest.mark.unit
class TestInitialPopulation:
    """Test suite for the seeded initial population."""

    def test_basis_vectors_then_random_points(self, simplex_poly: Polyhedron) -> None:
        """
        Test the first n rows are basis vectors and the rest are s-sparse simplex points.

        Args:
            simplex_poly: Four-asset simplex fixture
        """
        X = initial_population(4, 2, simplex_poly, seed=7)

        assert X.shape == (8, 4)
        np.testing.assert_array_equal(X[:4], np.eye(4))
        for x in X[4:]:
            assert is_feasible(x, simplex_poly, 2)

    def test_seed_determinism(self, simplex_poly: Polyhedron) -> None:
        """
        Test the same seed yields the same population.

        Args:
            simplex_poly: Four-asset simplex fixture
        """
        np.testing.assert_array_equal(
            initial_population(4, 2, simplex_poly, seed=3),
            initial_population(4, 2, simplex_poly, seed=3),
        )


@pytest.mark.slow
class TestGeneticRuns:
    """Test suite for complete NSGA-II and NSMA runs."""

    def test_nsga2_population_is_sparse(self, mv_instance: ProblemInstance) -> None:
        """
        Test every rank-0 feasible member respects the cardinality bound.

        Args:
            mv_instance: Mean-variance instance fixture
        """
        poly = build_polyhedron(mv_instance.constraints, mv_instance.model)
        params = GaParams(pop_size=16, seed=1, generations=5, time_budget=None)

        population = nsga2_run(mv_instance.model, mv_instance.objectives, poly, mv_instance.s, params)

        assert len(population) == 16
        best = population.best()
        assert best.size > 0
        for i in best:
            assert is_feasible(population.X[i], poly, mv_instance.s, tol=1e-6)

    def test_nsga2_is_reproducible(self, mv_instance: ProblemInstance) -> None:
        """
        Test a fixed seed and generation cap give identical populations.

        Args:
            mv_instance: Mean-variance instance fixture
        """
        poly = build_polyhedron(mv_instance.constraints, mv_instance.model)
        params = GaParams(pop_size=10, seed=4, generations=3, time_budget=None)

        first = nsga2_run(mv_instance.model, mv_instance.objectives, poly, mv_instance.s, params)
        second = nsga2_run(mv_instance.model, mv_instance.objectives, poly, mv_instance.s, params)

        np.testing.assert_array_equal(first.X, second.X)

    def test_nsma_refines_offspring(self, mv_instance: ProblemInstance) -> None:
        """
        Test the memetic variant returns feasible sparse members.

        Args:
            mv_instance: Mean-variance instance fixture
        """
        poly = build_polyhedron(mv_instance.constraints, mv_instance.model)
        params = GaParams(pop_size=10, seed=2, generations=2, time_budget=None)

        population = nsma_run(mv_instance.model, mv_instance.objectives, poly, mv_instance.s, params, refine_steps=2)

        for i in population.best():
            assert is_feasible(population.X[i], poly, mv_instance.s, tol=1e-6)

    def test_nsma_validates_schedule(self, mv_instance: ProblemInstance) -> None:
        """
        Test a refinement period below one is rejected.

        Args:
            mv_instance: Mean-variance instance fixture
        """
        poly = build_polyhedron(mv_instance.constraints, mv_instance.model)

        with pytest.raises(ConfigurationError):
            nsma_run(mv_instance.model, mv_instance.objectives, poly, mv_instance.s, refine_every=0)

    def test_sector_limits_respected_by_best_members(self) -> None:
        """Test constrained domination keeps sector-violating members out of the best set."""
        instance = make_mean_variance_instance(6, 2, seed=5)
        spec = ConstraintSpec(lower=np.zeros(6), upper=np.ones(6), sectors=[Sector((0, 1, 2), 0.0, 0.5)])
        poly = build_polyhedron(spec, instance.model)
        params = GaParams(pop_size=12, seed=0, generations=4, time_budget=None)

        population = nsga2_run(instance.model, instance.objectives, poly, instance.s, params)

        for i in population.best():
            assert population.X[i][:3].sum() <= 0.5 + 1e-6
