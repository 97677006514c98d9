"""Tests for the constraint set, feasibility reports, projections and the QP engine."""

from itertools import combinations

import numpy as np
import pytest

from sparsefront.constraints import (
    ConstraintSpec,
    Polyhedron,
    Sector,
    Turnover,
    build_polyhedron,
    is_feasible,
    minimize_on_support,
    normalize_project,
    project_onto_support,
    sparse_project,
    support_feasible,
)
from sparsefront.exceptions import ConfigurationError, InfeasibleError
from sparsefront.objectives import ObjectiveModel
from sparsefront.qp import solve_qp


@pytest.mark.unit
class TestConstraintSpec:
    """Test suite for constraint definition validation."""

    def test_rejects_negative_lower_bounds(self) -> None:
        """Test short positions are not allowed."""
        with pytest.raises(ConfigurationError):
            ConstraintSpec(lower=np.array([-0.1, 0.0]), upper=np.ones(2))

    def test_rejects_bounds_incompatible_with_budget(self) -> None:
        """Test upper bounds summing below one leave no portfolio."""
        with pytest.raises(ConfigurationError):
            ConstraintSpec(lower=np.zeros(3), upper=np.full(3, 0.3))

    def test_rejects_inverted_beta_window(self) -> None:
        """Test beta_min above beta_max is rejected."""
        with pytest.raises(ConfigurationError):
            ConstraintSpec(lower=np.zeros(2), upper=np.ones(2), beta_window=(1.2, 0.8))

    def test_rejects_sector_index_out_of_range(self) -> None:
        """Test sector indices must address existing assets."""
        with pytest.raises(ConfigurationError):
            ConstraintSpec(lower=np.zeros(2), upper=np.ones(2), sectors=[Sector((0, 5), 0.0, 1.0)])

    def test_beta_window_needs_betas(self) -> None:
        """Test a beta window cannot be built without asset betas."""
        spec = ConstraintSpec(lower=np.zeros(2), upper=np.ones(2), beta_window=(0.5, 1.5))

        with pytest.raises(ConfigurationError):
            build_polyhedron(spec, ObjectiveModel(c=np.ones(2)))

    def test_empty_region_is_reported(self) -> None:
        """Test a beta window no portfolio can reach makes the polyhedron infeasible."""
        spec = ConstraintSpec(lower=np.zeros(2), upper=np.ones(2), beta_window=(2.0, 3.0))
        model = ObjectiveModel(c=np.ones(2), beta=np.array([0.5, 1.0]))

        with pytest.raises(InfeasibleError):
            build_polyhedron(spec, model)


@pytest.mark.unit
class TestFeasibility:
    """Test suite for feasibility reports."""

    def test_basis_vector_is_feasible(self, toy_poly: Polyhedron) -> None:
        """
        Test a basis vector satisfies the simplex and s = 1.

        Args:
            toy_poly: Toy polyhedron fixture
        """
        report = is_feasible([1.0, 0.0, 0.0], toy_poly, s=1)

        assert report
        assert report.support == (0,)
        assert report.summary() == "feasible"

    def test_cardinality_violation(self, toy_poly: Polyhedron) -> None:
        """
        Test a two-asset portfolio violates s = 1.

        Args:
            toy_poly: Toy polyhedron fixture
        """
        report = is_feasible([0.5, 0.5, 0.0], toy_poly, s=1)

        assert not report
        assert [v.kind for v in report.violations] == ["cardinality"]

    def test_budget_violation(self, toy_poly: Polyhedron) -> None:
        """
        Test weights summing above one violate the equality row.

        Args:
            toy_poly: Toy polyhedron fixture
        """
        report = is_feasible([0.6, 0.6, 0.0], toy_poly)

        assert not report
        assert report.violations[0].kind == "equality"
        assert "equality[0]" in report.summary()

    def test_sector_rows(self) -> None:
        """Test sector exposure limits are checked."""
        spec = ConstraintSpec(lower=np.zeros(3), upper=np.ones(3), sectors=[Sector((0, 1), 0.0, 0.5)])
        poly = build_polyhedron(spec)

        assert is_feasible([0.25, 0.25, 0.5], poly)
        assert not is_feasible([0.5, 0.5, 0.0], poly)

    def test_turnover_lifts_auxiliary_block(self) -> None:
        """Test turnover is measured against the reference portfolio."""
        spec = ConstraintSpec(
            lower=np.zeros(3),
            upper=np.ones(3),
            turnover=Turnover(np.array([1.0, 0.0, 0.0]), 0.5),
        )
        poly = build_polyhedron(spec)

        assert poly.var_dim == 6
        assert is_feasible([0.75, 0.25, 0.0], poly)
        assert not is_feasible([0.0, 1.0, 0.0], poly)


@pytest.mark.unit
class TestProjections:
    """Test suite for sparse and restricted projections."""

    def test_sparse_project_keeps_largest(self) -> None:
        """Test clipping then keeping the s largest entries, lowest index first on ties."""
        np.testing.assert_allclose(sparse_project([0.5, -1.0, 0.3, 0.3], 2), [0.5, 0.0, 0.3, 0.0])

    def test_normalize_project(self) -> None:
        """Test the sparse projection is rescaled onto the simplex."""
        np.testing.assert_allclose(normalize_project([0.6, 0.2, 0.2, 0.0], 2), [0.75, 0.25, 0.0, 0.0])

    def test_normalize_project_falls_back_to_basis(self) -> None:
        """Test an all-negative input maps to the basis vector at its argmax."""
        np.testing.assert_allclose(normalize_project([-1.0, -2.0, -3.0], 1), [1.0, 0.0, 0.0])

    @pytest.mark.parametrize("seed", range(4))
    def test_sparse_project_matches_support_enumeration(self, seed: int) -> None:
        """
        Test the sparse projection equals the closest point over all C(n, s) supports.

        Args:
            seed: Random seed
        """
        rng = np.random.default_rng(seed)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            s = int(rng.integers(1, n + 1))
            u = rng.normal(size=n)
            best, best_distance = None, np.inf
            for J in combinations(range(n), s):
                v = np.zeros(n)
                v[list(J)] = np.maximum(u[list(J)], 0.0)
                distance = float(np.sum((v - u) ** 2))
                if distance < best_distance:
                    best, best_distance = v, distance

            np.testing.assert_array_equal(sparse_project(u, s), best)

    def test_support_feasibility_under_upper_bounds(self) -> None:
        """Test a single asset capped at 0.5 cannot carry the whole budget."""
        spec = ConstraintSpec(lower=np.zeros(3), upper=np.full(3, 0.5))
        poly = build_polyhedron(spec)

        assert not support_feasible(poly, (0,))
        assert support_feasible(poly, (0, 1))
        assert poly.cache[(0,)] is False

    def test_support_feasibility_with_linear_rows(self) -> None:
        """Test supports are checked by LP when sector rows are present."""
        spec = ConstraintSpec(lower=np.zeros(3), upper=np.ones(3), sectors=[Sector((0,), 0.0, 0.4)])
        poly = build_polyhedron(spec)

        assert not support_feasible(poly, (0,))
        assert support_feasible(poly, (0, 2))

    def test_project_onto_support(self, simplex_poly: Polyhedron) -> None:
        """
        Test the Euclidean projection onto a two-asset face of the simplex.

        Args:
            simplex_poly: Four-asset simplex fixture
        """
        x = project_onto_support([0.7, 0.5, 0.1, 0.0], simplex_poly, (0, 1))

        np.testing.assert_allclose(x, [0.6, 0.4, 0.0, 0.0], atol=1e-6)

    def test_minimize_on_infeasible_support(self) -> None:
        """Test minimising on a support Ω_c cannot use raises InfeasibleError."""
        poly = build_polyhedron(ConstraintSpec(lower=np.zeros(3), upper=np.full(3, 0.5)))

        with pytest.raises(InfeasibleError):
            minimize_on_support(np.eye(3), np.zeros(3), poly, (2,))


@pytest.mark.unit
class TestQuadraticProgram:
    """Test suite for the interior point QP engine."""

    def test_equality_only(self) -> None:
        """Test a QP with only the budget row is solved by one KKT system."""
        solution = solve_qp(np.eye(2), np.array([-1.0, -1.0]), E=np.ones((1, 2)), e=np.ones(1))

        np.testing.assert_allclose(solution.z, [0.5, 0.5], atol=1e-8)
        assert solution.method == "interior-point"

    def test_active_bound(self) -> None:
        """Test the solution lands on a vertex when the unconstrained optimum leaves the simplex."""
        solution = solve_qp(
            np.eye(2),
            np.array([-2.0, 0.0]),
            A=-np.eye(2),
            b=np.zeros(2),
            E=np.ones((1, 2)),
            e=np.ones(1),
        )

        np.testing.assert_allclose(solution.z, [1.0, 0.0], atol=1e-6)
        assert solution.objective == pytest.approx(-1.5, abs=1e-6)
