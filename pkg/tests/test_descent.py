"""Tests for projected gradient, MOIHT, MOSPD and the MOHyb cascade."""

import numpy as np
import pytest

from sparsefront.constraints import ConstraintSpec, Polyhedron, build_polyhedron, is_feasible
from sparsefront.descent import (
    MospdParams,
    moiht,
    mohyb,
    mopg,
    mospd,
    penalty_decomposition,
    projected_gradient,
)
from sparsefront.directions import common_direction, l_stationary_direction
from sparsefront.exceptions import ConfigurationError, InfeasibleError
from sparsefront.models import ProblemInstance, support_of
from sparsefront.objectives import ObjectiveSet, default_lipschitz
from sparsefront.synthetic import make_mean_variance_instance

E0, E1, E2 = np.eye(3)


class _DistanceTo:
    """f(x) = ½||x - p||² as a one-objective vector function."""

    m = 1

    def __init__(self, p: list[float]):
        self.p = np.asarray(p, dtype=float)

    def value(self, x: np.ndarray) -> np.ndarray:
        gap = x - self.p
        return np.array([0.5 * float(gap @ gap)])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return (x - self.p)[None, :]


def _sparse_start(n: int, s: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    x[rng.choice(n, size=s, replace=False)] = rng.dirichlet(np.ones(s))
    return x


@pytest.mark.unit
class TestProjectedGradient:
    """Test suite for multi-objective projected gradient."""

    def test_stationary_start_returns_immediately(self, toy_objectives: ObjectiveSet, toy_poly: Polyhedron) -> None:
        """
        Test a start on a single-asset support takes no step.

        Args:
            toy_objectives: Toy objective set fixture
            toy_poly: Toy polyhedron fixture
        """
        x, iterations, theta = projected_gradient(toy_objectives, E1, toy_poly, 1e-6, support=(1,))

        np.testing.assert_array_equal(x, E1)
        assert iterations == 0
        assert theta == 0.0

    def test_descends_on_dense_simplex(self, toy_objectives: ObjectiveSet, toy_poly: Polyhedron) -> None:
        """
        Test both objectives do not increase along the run.

        Args:
            toy_objectives: Toy objective set fixture
            toy_poly: Toy polyhedron fixture
        """
        x, iterations, theta = projected_gradient(toy_objectives, E0, toy_poly, 1e-6, max_iter=50)

        assert iterations > 0
        assert np.all(toy_objectives.value(x) <= toy_objectives.value(E0) + 1e-12)
        assert is_feasible(x, toy_poly, tol=1e-6)

    def test_reaches_interior_minimiser(self) -> None:
        """Test a single distance objective converges to its minimiser inside the simplex."""
        poly = build_polyhedron(ConstraintSpec.simplex(3))
        target = _DistanceTo([0.2, 0.3, 0.5])

        x, iterations, _ = projected_gradient(target, E0, poly, 1e-10)

        np.testing.assert_allclose(x, target.p, atol=1e-6)
        assert iterations >= 1

    def test_mopg_rejects_infeasible_start(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test the wrapper checks the start against Ω_c.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        with pytest.raises(InfeasibleError):
            mopg(toy_instance.model, toy_instance.objectives, [2.0, 0.0, 0.0], toy_poly, 1e-6)


@pytest.mark.unit
class TestMoiht:
    """Test suite for multi-objective iterative hard thresholding."""

    def test_basis_vector_is_l_stationary(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test e1 is already L-stationary with the default constant.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        result = moiht(toy_instance.model, toy_instance.objectives, E1, toy_poly, 1)

        assert result.status == "l_stationary"
        assert result.iterations == 0
        assert result.origin == "moiht"
        np.testing.assert_array_equal(result.x, E1)

    def test_small_l_jumps_support(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test a small L lets e0 move to the better support of e2.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        result = moiht(toy_instance.model, toy_instance.objectives, E0, toy_poly, 1, L=1.0)

        np.testing.assert_allclose(result.x, E2, atol=1e-8)
        assert result.trace[0]["support"] == (2,)

    def test_rejects_infeasible_start(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test a start violating the cardinality bound is rejected.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        with pytest.raises(InfeasibleError):
            moiht(toy_instance.model, toy_instance.objectives, [0.5, 0.5, 0.0], toy_poly, 1)


@pytest.mark.unit
class TestMospd:
    """Test suite for sparse penalty decomposition."""

    def test_parameters_are_validated(self) -> None:
        """Test sigma must exceed one."""
        with pytest.raises(ConfigurationError):
            MospdParams(sigma=1.0)

    def test_result_is_sparse_and_feasible(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test the reported point respects Ω_c and s = 1.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        result = mospd(toy_instance.model, toy_instance.objectives, E2, toy_poly, 1)

        assert is_feasible(result.x, toy_poly, 1, tol=1e-6)
        assert result.status in ("molz_stationary", "budget_exhausted")
        assert result.origin == "mospd"
        assert result.trace and {"iteration", "gap", "tau", "eps"} <= set(result.trace[0])

    def test_penalty_grows_and_tolerance_decays(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test tau increases and eps decreases between outer iterations.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        params = MospdParams(xy_gap_stop=0.0, max_outer=3)
        result = mospd(toy_instance.model, toy_instance.objectives, E0, toy_poly, 1, params)

        taus = [row["tau"] for row in result.trace]
        epss = [row["eps"] for row in result.trace]
        assert len(result.trace) == 3
        assert taus == pytest.approx([1e-2, 2e-2, 4e-2])
        assert epss == pytest.approx([1e-3, 9e-4, 8.1e-4])

    def test_distance_objective_lands_on_nearest_vertex(self) -> None:
        """Test s = 1 from e2 ends on the basis vector closest to (0.6, 0.3, 0.1)."""
        poly = build_polyhedron(ConstraintSpec.simplex(3))

        result = penalty_decomposition(_DistanceTo([0.6, 0.3, 0.1]), E2, poly, 1)

        np.testing.assert_allclose(result.x, E0, atol=1e-6)
        assert result.status == "molz_stationary"

    def test_rejects_infeasible_start(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test a dense start is rejected.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        with pytest.raises(InfeasibleError):
            mospd(toy_instance.model, toy_instance.objectives, [0.5, 0.5, 0.0], toy_poly, 1)


@pytest.mark.slow
class TestMohyb:
    """Test suite for the MOIHT then MOSPD cascade."""

    def test_toy_front_supports(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test starting from every basis vector recovers all three efficient supports.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        results = mohyb(toy_instance.model, toy_instance.objectives, [E0, E1, E2], toy_poly, 1)
        supports = {tuple(int(i) for i in np.flatnonzero(r.x > 1e-7)) for r in results}

        assert {(0,), (1,), (2,)} <= supports
        assert all(is_feasible(r.x, toy_poly, 1, tol=1e-6) for r in results)

    def test_no_starts(self, toy_instance: ProblemInstance, toy_poly: Polyhedron) -> None:
        """
        Test an empty start list gives an empty result.

        Args:
            toy_instance: Toy instance fixture
            toy_poly: Toy polyhedron fixture
        """
        assert mohyb(toy_instance.model, toy_instance.objectives, [], toy_poly, 1) == []


@pytest.mark.slow
class TestStationarityOfResults:
    """Test suite re-checking the stationarity each descent method reports."""

    @pytest.mark.parametrize("seed", range(5))
    def test_moiht_results_pass_exact_l_stationarity(self, seed: int) -> None:
        """
        Test MOIHT stops where the enumerated L-stationarity subproblem finds no descent.

        Args:
            seed: Random seed
        """
        instance = make_mean_variance_instance(8, 2, seed)
        objectives = ObjectiveSet(instance.model, instance.objectives)
        poly = build_polyhedron(instance.constraints, instance.model)

        result = moiht(instance.model, instance.objectives, _sparse_start(8, 2, seed), poly, 2)
        check = l_stationary_direction(result.x, default_lipschitz(objectives), objectives.jacobian(result.x), poly, 2)

        assert result.status == "l_stationary"
        assert check.exact
        assert check.theta >= -1e-7
        assert is_feasible(result.x, poly, 2, tol=1e-6)

    @pytest.mark.parametrize("seed", range(2))
    def test_mospd_results_are_stationary_on_their_support(self, seed: int) -> None:
        """
        Test the common direction on the reported support finds no meaningful descent.

        Args:
            seed: Random seed
        """
        instance = make_mean_variance_instance(6, 2, seed)
        objectives = ObjectiveSet(instance.model, instance.objectives)
        poly = build_polyhedron(instance.constraints, instance.model)

        result = mospd(instance.model, instance.objectives, _sparse_start(6, 2, seed), poly, 2)
        check = common_direction(result.x, support_of(result.x), objectives.jacobian(result.x), poly)

        assert is_feasible(result.x, poly, 2, tol=1e-6)
        assert check.theta >= -1e-5
