"""Tests for supports, dominance and the per-support front list."""

import numpy as np
import pytest

from sparsefront.constraints import ConstraintSpec
from sparsefront.exceptions import ConfigurationError, InfeasibleError, PreconditionError
from sparsefront.metrics import purity
from sparsefront.models import (
    Dominance,
    EvaluatedPoint,
    FrontList,
    ProblemInstance,
    compare,
    crowding_distance,
    nondominated_filter,
    support_of,
    super_supports,
)
from sparsefront.objectives import ObjectiveModel, ObjectiveTerm


def _point(F, J, x=None) -> EvaluatedPoint:
    F = np.asarray(F, dtype=float)
    if x is None:
        x = np.zeros(4)
        x[list(J)] = 1.0 / len(J)
    return EvaluatedPoint(x=np.asarray(x, dtype=float), F=F, J=tuple(J))


@pytest.mark.unit
class TestSupports:
    """Test suite for support extraction and super-support enumeration."""

    def test_support_ignores_tiny_weights(self) -> None:
        """Test components below the support tolerance are treated as zero."""
        assert support_of([0.5, 1e-9, 0.5, 0.0]) == (0, 2)

    def test_super_supports_pad_in_lexicographic_order(self) -> None:
        """Test every completion of a short support is listed, smallest first."""
        result = super_supports([1.0, 0.0, 0.0, 0.0], 2)

        assert result == [(0, 1), (0, 2), (0, 3)]

    def test_super_supports_of_full_support(self) -> None:
        """Test a support already of size s is its only super support."""
        assert super_supports([0.0, 0.5, 0.0, 0.5], 2) == [(1, 3)]

    def test_super_supports_reject_dense_points(self) -> None:
        """Test a point with more than s nonzeros has no super support."""
        with pytest.raises(InfeasibleError):
            super_supports([0.5, 0.25, 0.25, 0.0], 2)

    def test_point_check(self) -> None:
        """Test EvaluatedPoint.check enforces |J| = s and supp(x) within J."""
        point = _point([1.0, 1.0], (0, 1), x=[0.5, 0.5, 0.0, 0.0])
        point.check(2)

        with pytest.raises(InfeasibleError):
            point.check(3)
        with pytest.raises(InfeasibleError):
            _point([1.0, 1.0], (0, 2), x=[0.5, 0.5, 0.0, 0.0]).check(2)


@pytest.mark.unit
class TestDominance:
    """Test suite for Pareto comparisons."""

    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ([1, 2], [2, 3], Dominance.DOMINATES),
            ([1, 3], [1, 2], Dominance.DOMINATED),
            ([1, 2], [1, 2], Dominance.EQUAL),
            ([1, 3], [2, 1], Dominance.INCOMPARABLE),
            ([1, 2], [1, 3], Dominance.DOMINATES),
        ],
    )
    def test_compare(self, a: list, b: list, expected: Dominance) -> None:
        """
        Test the relation of two objective vectors.

        Args:
            a: First objective vector
            b: Second objective vector
            expected: Relation of a with respect to b
        """
        assert compare(a, b) is expected

    def test_compare_rejects_mismatched_lengths(self) -> None:
        """Test vectors of different length cannot be compared."""
        with pytest.raises(PreconditionError):
            compare([1, 2], [1, 2, 3])

    def test_nondominated_filter_keeps_ties(self) -> None:
        """Test equal points both survive while dominated ones are dropped."""
        F = [[1, 2], [2, 1], [1, 2], [3, 3]]

        assert nondominated_filter(F) == [0, 1, 2]

    def test_nondominated_filter_rejects_empty(self) -> None:
        """Test filtering nothing is a precondition error."""
        with pytest.raises(PreconditionError):
            nondominated_filter([])

    def test_crowding_distance(self) -> None:
        """Test boundary points get infinity and interior points the normalised gap sum."""
        distance = crowding_distance([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])

        assert np.isinf(distance[0]) and np.isinf(distance[2])
        assert distance[1] == pytest.approx(2.0)


@pytest.mark.unit
class TestFrontList:
    """Test suite for the per-support front list."""

    def test_insert_rejects_dominated_and_equal(self) -> None:
        """Test a same-support entry blocks dominated and equal newcomers."""
        front = FrontList()

        assert front.insert(_point([1, 1], (0, 1)))
        assert not front.insert(_point([2, 2], (0, 1)))
        assert not front.insert(_point([1, 1], (0, 1)))
        assert len(front) == 1

    def test_insert_evicts_dominated_entries(self) -> None:
        """Test a dominating newcomer replaces the entries it dominates."""
        front = FrontList()
        front.insert(_point([2, 2], (0, 1)))
        front.insert(_point([0, 5], (0, 1)))

        assert front.insert(_point([1, 1], (0, 1)))
        assert sorted(tuple(p.F) for p in front) == [(0.0, 5.0), (1.0, 1.0)]

    def test_groups_are_independent(self) -> None:
        """Test dominance is only checked inside a support group."""
        front = FrontList()
        front.insert(_point([1, 1], (0, 1)))

        assert front.insert(_point([5, 5], (2, 3)))
        assert front.supports() == [(0, 1), (2, 3)]

    def test_membership_is_identity(self) -> None:
        """Test an equal-valued copy is not considered a member."""
        point = _point([1, 1], (0, 1))
        front = FrontList.from_points([point])

        assert point in front
        assert _point([1, 1], (0, 1)) not in front

    def test_remove_drops_empty_groups(self) -> None:
        """Test removing the last point of a group removes the support."""
        point = _point([1, 1], (0, 1))
        front = FrontList.from_points([point])
        front.remove(point)

        assert front.supports() == []
        assert front.objective_matrix().shape == (0, 0)

    def test_sorted_points(self) -> None:
        """Test points are ordered by support, then by first objective."""
        front = FrontList.from_points([
            _point([3, 0], (2, 3)),
            _point([2, 1], (0, 1)),
            _point([1, 2], (0, 1)),
        ])

        assert [tuple(p.F) for p in front.sorted_points()] == [(1.0, 2.0), (2.0, 1.0), (3.0, 0.0)]


@pytest.mark.unit
class TestRandomizedProperties:
    """Test suite for dominance and front-list invariants on random data."""

    MIRROR = {
        Dominance.DOMINATES: Dominance.DOMINATED,
        Dominance.DOMINATED: Dominance.DOMINATES,
        Dominance.EQUAL: Dominance.EQUAL,
        Dominance.INCOMPARABLE: Dominance.INCOMPARABLE,
    }

    @pytest.mark.parametrize("seed", range(5))
    def test_compare_is_antisymmetric(self, seed: int) -> None:
        """
        Test swapping the arguments mirrors the relation.

        Args:
            seed: Random seed
        """
        rng = np.random.default_rng(seed)
        for _ in range(200):
            m = int(rng.integers(1, 5))
            # Small integer values make ties and equal vectors common
            a, b = rng.integers(0, 3, size=(2, m))

            assert compare(b, a) is self.MIRROR[compare(a, b)]

    @pytest.mark.parametrize("seed", range(5))
    def test_nondominated_filter_matches_pairwise_scan(self, seed: int) -> None:
        """
        Test the filter keeps exactly the rows no other row strictly dominates.

        Args:
            seed: Random seed
        """
        rng = np.random.default_rng(seed)
        for _ in range(20):
            F = rng.integers(0, 6, size=(int(rng.integers(1, 30)), int(rng.integers(2, 4)))).astype(float)
            expected = [
                i
                for i in range(len(F))
                if not any(np.all(F[j] <= F[i]) and np.any(F[j] < F[i]) for j in range(len(F)))
            ]

            assert nondominated_filter(F) == expected

    @pytest.mark.parametrize("seed", range(5))
    def test_front_list_groups_stay_nondominated(self, seed: int) -> None:
        """
        Test every group is mutually nondominated after each random insertion.

        Args:
            seed: Random seed
        """
        rng = np.random.default_rng(seed)
        supports = [(0, 1), (0, 2), (1, 3)]
        front = FrontList()
        for _ in range(150):
            J = supports[int(rng.integers(len(supports)))]
            point = _point(rng.integers(0, 8, size=2), J)
            inserted = front.insert(point)

            assert inserted == (point in front)
            for K in front.supports():
                group = front.group(K)
                for a in group:
                    for b in group:
                        assert a is b or compare(a.F, b.F) is Dominance.INCOMPARABLE

    @pytest.mark.parametrize("seed", range(5))
    def test_purity_matches_brute_force_count(self, seed: int) -> None:
        """
        Test purity is the share of each solver's points no merged point strictly dominates.

        Args:
            seed: Random seed
        """
        rng = np.random.default_rng(seed)
        fronts = {name: rng.integers(0, 5, size=(int(rng.integers(1, 8)), 2)).astype(float) for name in "abc"}
        union = np.vstack(list(fronts.values()))

        result = purity(fronts)

        for name, F in fronts.items():
            survivors = sum(
                not any(np.all(u <= f) and np.any(u < f) for u in union)
                for f in F
            )
            assert result[name] == pytest.approx(survivors / len(F))


@pytest.mark.unit
class TestProblemInstance:
    """Test suite for instance validation."""

    def test_cardinality_bound_must_be_below_n(self) -> None:
        """Test s = n is rejected."""
        model = ObjectiveModel(c=np.ones(3))
        with pytest.raises(ConfigurationError):
            ProblemInstance("bad", 3, 3, [ObjectiveTerm("ER")], ConstraintSpec.simplex(3), model)

    def test_objectives_required(self) -> None:
        """Test an instance without objectives is rejected."""
        model = ObjectiveModel(c=np.ones(3))
        with pytest.raises(ConfigurationError):
            ProblemInstance("bad", 3, 1, [], ConstraintSpec.simplex(3), model)

    def test_m_counts_objectives(self, toy_instance: ProblemInstance) -> None:
        """
        Test m is the number of selected objectives.

        Args:
            toy_instance: Toy instance fixture
        """
        assert toy_instance.m == 2
