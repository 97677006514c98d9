"""Pydantic documents: instance JSON, experiment configuration, run records and HTTP payloads."""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from . import config
from .constraints import ConstraintSpec, Sector, Turnover
from .exceptions import ConfigurationError
from .models import ProblemInstance
from .objectives import ObjectiveModel, ObjectiveTerm, check_selection

PHASE1_SOLVERS = ("scal", "mohyb", "nsga2", "nsma")
PIPELINES = tuple(PHASE1_SOLVERS) + tuple(f"{name}+sfsd" for name in PHASE1_SOLVERS) + ("nsga2-long",)


def _optional_array(values) -> Optional[np.ndarray]:
    return None if values is None else np.asarray(values, dtype=float)


def _finite_or_none(values: np.ndarray) -> List[Optional[float]]:
    return [float(v) if np.isfinite(v) else None for v in values]


class ObjectiveEntry(BaseModel):
    id: str
    scale: float = 1.0
    sense: Optional[str] = None


class SectorEntry(BaseModel):
    indices: List[int]
    min: float
    max: float


class TurnoverEntry(BaseModel):
    x0: List[float]
    tau: float


class InstanceDocument(BaseModel):
    """Instance JSON. Asset indices are 0-based; a null upper bound means unbounded."""

    name: str
    n: int
    s: int
    objectives: List[ObjectiveEntry]
    c: Optional[List[float]] = None
    Q: Optional[List[List[float]]] = None
    esg: Optional[List[float]] = None
    coskew: Optional[List[float]] = None
    beta: Optional[List[float]] = None
    centered_returns: Optional[List[List[float]]] = None
    beta_min: Optional[float] = None
    beta_max: Optional[float] = None
    lower: Optional[List[float]] = None
    upper: Optional[List[Optional[float]]] = None
    sectors: List[SectorEntry] = Field(default_factory=list)
    turnover: Optional[TurnoverEntry] = None

    @model_validator(mode="after")
    def check_beta_window(self) -> "InstanceDocument":
        if (self.beta_min is None) != (self.beta_max is None):
            raise ValueError("beta_min and beta_max must be given together")
        if self.coskew is not None and len(self.coskew) != self.n ** 3:
            raise ValueError(f"flattened coskew must hold n^3 = {self.n ** 3} values")
        return self

    def to_instance(self) -> ProblemInstance:
        """Build the validated in-memory instance; any inconsistency raises ConfigurationError."""
        n = self.n
        coskew = None if self.coskew is None else np.asarray(self.coskew, dtype=float).reshape(n, n, n)
        model = ObjectiveModel(
            c=_optional_array(self.c),
            Q=_optional_array(self.Q),
            esg=_optional_array(self.esg),
            coskew=coskew,
            beta=_optional_array(self.beta),
            centered_returns=_optional_array(self.centered_returns),
        )
        if model.n != n:
            raise ConfigurationError(f"model parameters describe {model.n} assets, instance declares n={n}")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        if self.upper is None:
            upper = np.full(n, np.inf)
        else:
            upper = np.array([np.inf if u is None else u for u in self.upper], dtype=float)
        spec = ConstraintSpec(
            lower=lower,
            upper=upper,
            beta_window=None if self.beta_min is None else (self.beta_min, self.beta_max),
            sectors=[Sector(tuple(sec.indices), sec.min, sec.max) for sec in self.sectors],
            turnover=None if self.turnover is None else Turnover(np.asarray(self.turnover.x0, dtype=float), self.turnover.tau),
        )
        if spec.n != n:
            raise ConfigurationError(f"bounds describe {spec.n} assets, instance declares n={n}")
        selection = [ObjectiveTerm(o.id, o.scale, o.sense) for o in self.objectives]
        check_selection(model, selection)
        return ProblemInstance(name=self.name, n=n, s=self.s, objectives=selection, constraints=spec, model=model)

    @classmethod
    def from_instance(cls, instance: ProblemInstance) -> "InstanceDocument":
        model = instance.model
        spec = instance.constraints

        def listed(value: Optional[np.ndarray]):
            return None if value is None else value.tolist()

        return cls(
            name=instance.name,
            n=instance.n,
            s=instance.s,
            objectives=[ObjectiveEntry(id=t.id, scale=t.scale, sense=t.sense) for t in instance.objectives],
            c=listed(model.c),
            Q=listed(model.Q),
            esg=listed(model.esg),
            coskew=None if model.coskew is None else model.coskew.reshape(-1).tolist(),
            beta=listed(model.beta),
            centered_returns=listed(model.centered_returns),
            beta_min=None if spec.beta_window is None else spec.beta_window[0],
            beta_max=None if spec.beta_window is None else spec.beta_window[1],
            lower=spec.lower.tolist(),
            upper=_finite_or_none(spec.upper),
            sectors=[SectorEntry(indices=list(sec.indices), min=sec.min, max=sec.max) for sec in spec.sectors],
            turnover=None if spec.turnover is None else TurnoverEntry(x0=spec.turnover.x0.tolist(), tau=spec.turnover.tau),
        )


class IngestConfig(BaseModel):
    """Market data files and the constraints attached to the ingested instance."""

    prices_csv: str
    market_column: str
    esg_csv: Optional[str] = None
    name: str = "ingested"
    s: int
    objectives: List[ObjectiveEntry] = Field(
        default_factory=lambda: [ObjectiveEntry(id="ER", scale=config.DEFAULT_SCALES["ER"]),
                                 ObjectiveEntry(id="V", scale=config.DEFAULT_SCALES["V"])]
    )
    log_returns: bool = False
    ddof: int = 0
    beta_min: Optional[float] = None
    beta_max: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    sectors: List[SectorEntry] = Field(default_factory=list)
    output: str = "instance.json"

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    """One experiment: instances x pipelines x seeds, with per-phase budgets.

    Budgets are in seconds; iteration caps may replace or complement them.
    """

    instances: List[str] = Field(default_factory=list)
    pipelines: List[str] = Field(default_factory=lambda: ["mohyb+sfsd"])
    seeds: List[int] = Field(default_factory=lambda: [0])
    phase1_budget: Optional[float] = config.PHASE1_BUDGET
    sfsd_budget: Optional[float] = config.SFSD_BUDGET
    phase1_iterations: Optional[int] = None
    sfsd_iterations: Optional[int] = None
    output_dir: str = "results"
    trace: bool = False
    population_size: int = 100
    refine_every: int = 1
    refine_steps: int = 5
    scal_weights: int = 50
    nsga2_long_runs: int = 0
    nsga2_long_budget: float = 1.5 * config.PHASE1_BUDGET
    ingest: Optional[IngestConfig] = None

    class Config:
        extra = "forbid"

    @field_validator("pipelines")
    @classmethod
    def known_pipelines(cls, value: List[str]) -> List[str]:
        unknown = [p for p in value if p not in PIPELINES]
        if unknown:
            raise ValueError(f"unknown pipelines {unknown}, expected any of {list(PIPELINES)}")
        return value

    @field_validator("seeds")
    @classmethod
    def at_least_one_seed(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        return value

    @model_validator(mode="after")
    def check_budgets(self) -> "ExperimentConfig":
        # An explicit iteration cap replaces the default time budget of its phase
        for budget, cap in (("phase1_budget", "phase1_iterations"), ("sfsd_budget", "sfsd_iterations")):
            if cap in self.model_fields_set and budget not in self.model_fields_set:
                setattr(self, budget, None)
        for name in ("phase1_budget", "sfsd_budget", "nsga2_long_budget"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("phase1_iterations", "sfsd_iterations"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.phase1_budget is None and self.phase1_iterations is None:
            raise ValueError("phase 1 needs a time budget or an iteration cap")
        if self.sfsd_budget is None and self.sfsd_iterations is None:
            raise ValueError("SFSD needs a time budget or an iteration cap")
        if self.population_size < 2 or self.scal_weights < 1:
            raise ValueError("population_size must be >= 2 and scal_weights >= 1")
        return self


class RunRecord(BaseModel):
    """One (instance, pipeline, seed) cell of an experiment."""

    instance: str
    pipeline: str
    seed: int
    config_hash: str
    status: str = "ok"
    error: Optional[str] = None
    wall_time: float = 0.0
    phase1_time: float = 0.0
    sfsd_time: float = 0.0
    sfsd_iterations: int = 0
    stop_reason: str = ""
    front_csv: Optional[str] = None
    trace_csv: Optional[str] = None
    lineage_csv: Optional[str] = None
    points: int = 0
    supports: int = 0
    hypervolume: Optional[float] = None
    best_seed: bool = False


# HTTP payloads

class EvaluateRequest(BaseModel):
    instance: InstanceDocument
    x: List[float]


class EvaluateResponse(BaseModel):
    objectives: List[float]
    support: List[int]
    feasible: bool
    violations: List[str] = Field(default_factory=list)


class ScalarizeRequest(BaseModel):
    instance: InstanceDocument
    weights: List[float]
    budget: int = config.SCALARIZATION_BUDGET
    seed: int = 0


class ScalarizeResponse(BaseModel):
    x: List[float]
    value: float
    objectives: List[float]
    support: List[int]
    optimal: bool
    method: str


class MetricsRequest(BaseModel):
    """Fronts in the minimisation convention, keyed by solver name."""

    fronts: Dict[str, List[List[float]]]
    reference_point: Optional[List[float]] = None


class SolverMetrics(BaseModel):
    solver: str
    points: int
    purity: Optional[float] = None
    gamma: Optional[float] = None
    hv: float


class MetricsResponse(BaseModel):
    reference_point: List[float]
    results: List[SolverMetrics]
