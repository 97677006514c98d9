"""Pytest configuration and shared fixtures for the sparse front test suite.

Every fixture builds its data in memory or under ``tmp_path``; no external
files or services are needed. The three-asset toy instance is the workhorse:
its feasible set is {e0, e1, e2} with objective pairs (2, 4), (0.5, 5) and (3, 1).
"""

import json
from pathlib import Path
from typing import Generator

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sparsefront.constraints import ConstraintSpec, Polyhedron, build_polyhedron
from sparsefront.main import app
from sparsefront.models import EvaluatedPoint, ProblemInstance
from sparsefront.objectives import ObjectiveSet
from sparsefront.schemas import InstanceDocument
from sparsefront.storage import save_instance
from sparsefront.synthetic import make_mean_variance_instance, make_toy_instance


@pytest.fixture
def toy_instance() -> ProblemInstance:
    """
    Three-asset toy instance with s = 1.

    Returns:
        ProblemInstance: objectives (V, ER) both minimised over the simplex
    """
    return make_toy_instance()


@pytest.fixture
def toy_poly(toy_instance: ProblemInstance) -> Polyhedron:
    """
    Constraint polyhedron of the toy instance (the plain simplex).

    Args:
        toy_instance: Toy instance fixture

    Returns:
        Polyhedron: simplex over three assets
    """
    return build_polyhedron(toy_instance.constraints, toy_instance.model)


@pytest.fixture
def toy_objectives(toy_instance: ProblemInstance) -> ObjectiveSet:
    """
    Objective set of the toy instance.

    Args:
        toy_instance: Toy instance fixture

    Returns:
        ObjectiveSet: (V, ER) in the minimisation convention
    """
    return ObjectiveSet(toy_instance.model, toy_instance.objectives)


@pytest.fixture
def toy_basis_points(toy_objectives: ObjectiveSet) -> list[EvaluatedPoint]:
    """
    The three feasible toy portfolios, each paired with its own support.

    Args:
        toy_objectives: Toy objective set fixture

    Returns:
        list[EvaluatedPoint]: e0, e1 and e2 with supports (0,), (1,) and (2,)
    """
    points = []
    for i in range(3):
        x = np.eye(3)[i]
        points.append(EvaluatedPoint(x=x, F=toy_objectives.value(x), J=(i,), origin="basis"))
    return points


@pytest.fixture
def simplex_poly() -> Polyhedron:
    """
    Plain four-asset simplex.

    Returns:
        Polyhedron: {x >= 0, sum(x) = 1} in four dimensions
    """
    return build_polyhedron(ConstraintSpec.simplex(4))


@pytest.fixture
def mv_instance() -> ProblemInstance:
    """
    Small random mean-variance instance (n = 8, s = 2).

    Returns:
        ProblemInstance: objectives (ER, V) over the simplex
    """
    return make_mean_variance_instance(8, 2, seed=0)


@pytest.fixture
def toy_document(toy_instance: ProblemInstance) -> dict:
    """
    JSON-ready instance document of the toy instance.

    Args:
        toy_instance: Toy instance fixture

    Returns:
        dict: payload accepted by the HTTP endpoints
    """
    return InstanceDocument.from_instance(toy_instance).model_dump(mode="json")


@pytest.fixture
def toy_instance_file(tmp_path: Path, toy_instance: ProblemInstance) -> Path:
    """
    Toy instance saved as instance JSON.

    Args:
        tmp_path: Pytest temporary directory
        toy_instance: Toy instance fixture

    Returns:
        Path: location of toy.json
    """
    return save_instance(toy_instance, tmp_path / "toy.json")


@pytest.fixture
def experiment_file(tmp_path: Path, toy_instance_file: Path) -> Path:
    """
    Fast experiment config over the toy instance.

    Iteration caps replace the time budgets so runs are short and deterministic.

    Args:
        tmp_path: Pytest temporary directory
        toy_instance_file: Saved toy instance fixture

    Returns:
        Path: location of experiment.json
    """
    payload = {
        "instances": [toy_instance_file.name],
        "pipelines": ["mohyb+sfsd", "scal"],
        "seeds": [0],
        "phase1_iterations": 20,
        "sfsd_iterations": 10,
        "output_dir": "results",
        "population_size": 10,
        "scal_weights": 21,
    }
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


@pytest.fixture
def client() -> Generator[TestClient, None, None]:
    """
    FastAPI test client for the service.

    Yields:
        TestClient: client bound to the application
    """
    with TestClient(app) as test_client:
        yield test_client
