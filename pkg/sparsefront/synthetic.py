"""Toy and synthetic instances, plus a dense-sampling oracle for two-asset supports."""

from __future__ import annotations

from itertools import combinations
from typing import Optional

import numpy as np

from .constraints import ConstraintSpec, build_polyhedron, is_feasible
from .exceptions import PreconditionError
from .models import ProblemInstance, SupportSet, nondominated_filter
from .objectives import ObjectiveModel, ObjectiveSet, ObjectiveTerm
from .seeding import make_rng


def make_toy_instance() -> ProblemInstance:
    """Three assets, one of them held: objectives 2x1²+0.5x2²+3x3² and 4x1+5x2+x3, both minimised.

    The feasible set is {e1, e2, e3} with objective pairs (2, 4), (0.5, 5) and (3, 1);
    all three are efficient but e1 is not supported.
    """
    model = ObjectiveModel(c=np.array([4.0, 5.0, 1.0]), Q=np.diag([4.0, 1.0, 6.0]))
    return ProblemInstance(
        name="toy",
        n=3,
        s=1,
        objectives=[ObjectiveTerm("V", 1.0), ObjectiveTerm("ER", 1.0, "min")],
        constraints=ConstraintSpec.simplex(3),
        model=model,
    )


def make_mean_variance_instance(n: int, s: int, seed: int, name: Optional[str] = None, factors: int = 3) -> ProblemInstance:
    """Random mean-variance instance with a low-rank-plus-ridge covariance."""
    rng = make_rng(seed, "mean-variance-instance")
    B = rng.normal(scale=0.1, size=(n, factors))
    Q = B @ B.T / factors + np.diag(rng.uniform(0.001, 0.01, size=n))
    Q = 0.5 * (Q + Q.T)
    c = rng.uniform(0.0, 0.1, size=n)
    return ProblemInstance(
        name=name or f"mv_n{n}_s{s}_seed{seed}",
        n=n,
        s=s,
        objectives=[ObjectiveTerm("ER", 1.0), ObjectiveTerm("V", 1.0)],
        constraints=ConstraintSpec.simplex(n),
        model=ObjectiveModel(c=c, Q=Q),
    )


def make_multi_support_instance(n: int = 8, seed: int = 0, name: Optional[str] = None) -> ProblemInstance:
    """Mean-variance instance, s = 2, whose efficient front crosses many asset pairs.

    Returns grow linearly while volatility grows faster, and correlations are weak,
    so neighbouring assets take turns on the frontier.
    """
    rng = make_rng(seed, "multi-support-instance")
    idx = np.arange(1, n + 1, dtype=float)
    c = 0.01 * idx
    vol = 0.02 * idx ** 1.5
    noise = rng.uniform(-0.05, 0.05, size=(n, n))
    corr = np.eye(n) + 0.5 * (noise + noise.T) * (1 - np.eye(n))
    Q = np.outer(vol, vol) * corr
    eigenvalues, vectors = np.linalg.eigh(Q)
    Q = vectors @ np.diag(np.maximum(eigenvalues, 1e-8)) @ vectors.T
    Q = 0.5 * (Q + Q.T)
    return ProblemInstance(
        name=name or f"multi_n{n}_seed{seed}",
        n=n,
        s=2,
        objectives=[ObjectiveTerm("ER", 1.0), ObjectiveTerm("V", 1.0)],
        constraints=ConstraintSpec.simplex(n),
        model=ObjectiveModel(c=c, Q=Q),
    )


def support_front_oracle(instance: ProblemInstance, grid: int = 200) -> set[SupportSet]:
    """Supports of the globally nondominated points among dense samples of every asset pair.

    Only interior segment points are sampled, so every returned support has two assets.
    """
    if instance.s != 2:
        raise PreconditionError("the support oracle samples two-asset portfolios only")
    objectives = ObjectiveSet(instance.model, instance.objectives)
    poly = build_polyhedron(instance.constraints, instance.model)
    t = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    values = []
    supports: list[SupportSet] = []
    for i, j in combinations(range(instance.n), 2):
        for weight in t:
            x = np.zeros(instance.n)
            x[i], x[j] = weight, 1.0 - weight
            if not is_feasible(x, poly, 2):
                continue
            values.append(objectives.value(x))
            supports.append((i, j))
    if not values:
        return set()
    keep = nondominated_filter(np.vstack(values))
    return {supports[k] for k in keep}
