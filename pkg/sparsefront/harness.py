"""Experiment runner: ingestion, two-phase pipelines, reference fronts and reports."""

import hashlib
import json
import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import config
from .constraints import (
    ConstraintSpec,
    Polyhedron,
    Sector,
    build_polyhedron,
    is_feasible,
    project_onto_support,
    support_feasible,
)
from .descent import mohyb
from .directions import common_direction
from .evolutionary import GaParams, initial_population, nsga2_run, nsma_run
from .exceptions import ConfigurationError, DataError, SparseFrontError
from .metrics import (
    ReferenceFront,
    build_reference,
    evaluate_fronts,
    hypervolume,
    performance_profile,
    reference_point,
)
from .models import EvaluatedPoint, ProblemInstance, nondominated_filter, super_supports
from .objectives import ObjectiveSet, ObjectiveTerm, estimate_model, returns_from_prices
from .scalarization import lambda_grid, scalarization_front
from .schemas import ExperimentConfig, IngestConfig, RunRecord
from .sfsd import LinkedTrace, SfsdParams, SfsdSolver
from .storage import (
    atomic_write_text,
    load_instance,
    load_runs,
    read_front_csv,
    save_instance,
    save_runs,
    write_front_csv,
    write_metrics_csv,
    write_plot_data,
    write_profile_csv,
    write_trace_csv,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RUNS_FILE = "runs.json"
LONG_RUN_SEED_OFFSET = 1000


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _resolve(base: Path, value: str) -> str:
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_config(path: PathLike) -> ExperimentConfig:
    """Read a TOML or JSON experiment file; relative paths are taken from its directory."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        payload = tomllib.loads(raw.decode("utf-8")) if path.suffix == ".toml" else json.loads(raw)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    try:
        cfg = ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment config {path}: {exc}") from exc
    base = path.parent
    cfg.instances = [_resolve(base, p) for p in cfg.instances]
    cfg.output_dir = _resolve(base, cfg.output_dir)
    if cfg.ingest is not None:
        cfg.ingest.prices_csv = _resolve(base, cfg.ingest.prices_csv)
        if cfg.ingest.esg_csv is not None:
            cfg.ingest.esg_csv = _resolve(base, cfg.ingest.esg_csv)
        cfg.ingest.output = _resolve(base, cfg.ingest.output)
    return cfg


def config_hash(cfg: ExperimentConfig, instance: str, pipeline: str) -> str:
    """Stable digest of everything that shapes a cell's output except the seed."""
    payload = cfg.model_dump(mode="json", exclude={"seeds", "output_dir", "instances", "pipelines", "ingest"})
    payload.update(instance=Path(instance).name, pipeline=pipeline)
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _read_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"malformed CSV {path}: {exc}") from exc


def _rows(mask: pd.Series) -> List[int]:
    """File line numbers (header is line 1) of the flagged rows."""
    return [int(i) + 2 for i in np.flatnonzero(mask.to_numpy())]


def read_prices(path: PathLike, market_column: str) -> tuple[pd.DataFrame, pd.Series]:
    """Asset prices indexed by date and the market index column."""
    frame = _read_csv(path)
    if "date" not in frame.columns:
        raise DataError(f"{path}: missing 'date' column")
    if market_column not in frame.columns:
        raise DataError(f"{path}: market column '{market_column}' not found")
    dates = pd.to_datetime(frame["date"], errors="coerce", format="ISO8601")
    if dates.isna().any():
        raise DataError(f"{path}: unparseable dates on rows {_rows(dates.isna())}")
    backwards = dates.diff() <= pd.Timedelta(0)
    if backwards.any():
        raise DataError(f"{path}: dates are not strictly increasing on rows {_rows(backwards)}")
    values = frame.drop(columns=["date"]).apply(pd.to_numeric, errors="coerce")
    missing = values.isna().any(axis=1)
    if missing.any():
        raise DataError(f"{path}: missing or non-numeric prices on rows {_rows(missing)}")
    values.index = dates
    market = values.pop(market_column)
    if values.shape[1] == 0:
        raise DataError(f"{path}: no asset columns besides the market index")
    return values, market


def read_esg(path: PathLike, tickers: Sequence[str]) -> np.ndarray:
    frame = _read_csv(path)
    if not {"ticker", "score"} <= set(frame.columns):
        raise DataError(f"{path}: expected columns 'ticker,score'")
    scores = pd.to_numeric(frame["score"], errors="coerce")
    if scores.isna().any():
        raise DataError(f"{path}: missing or non-numeric scores on rows {_rows(scores.isna())}")
    lookup = dict(zip(frame["ticker"].astype(str), scores))
    absent = [t for t in tickers if t not in lookup]
    if absent:
        raise DataError(f"{path}: no ESG score for {absent}")
    return np.array([lookup[t] for t in tickers], dtype=float)


def ingest(
    prices_csv: PathLike,
    esg_csv: Optional[PathLike],
    market_column: str,
    spec: IngestConfig,
    output: Optional[PathLike] = None,
) -> ProblemInstance:
    """Estimate a model from price history and attach constraints and objective scales.

    When ``output`` is given the instance JSON is written there.
    """
    prices, market = read_prices(prices_csv, market_column)
    returns = returns_from_prices(prices, spec.log_returns)
    market_returns = returns_from_prices(market.to_frame(), spec.log_returns).iloc[:, 0]
    tickers = [str(t) for t in prices.columns]
    esg = None if esg_csv is None else read_esg(esg_csv, tickers)
    model = estimate_model(returns.to_numpy(), market_returns.to_numpy(), esg, spec.ddof)

    n = len(tickers)
    lower = np.zeros(n) if spec.lower is None else np.full(n, spec.lower)
    upper = np.full(n, np.inf) if spec.upper is None else np.full(n, spec.upper)
    window = None if spec.beta_min is None or spec.beta_max is None else (spec.beta_min, spec.beta_max)
    constraints = ConstraintSpec(
        lower=lower,
        upper=upper,
        beta_window=window,
        sectors=[Sector(tuple(sec.indices), sec.min, sec.max) for sec in spec.sectors],
    )
    objectives = [
        ObjectiveTerm(
            entry.id,
            entry.scale if "scale" in entry.model_fields_set else config.DEFAULT_SCALES[entry.id],
            entry.sense,
        )
        for entry in spec.objectives
    ]
    instance = ProblemInstance(spec.name, n, spec.s, objectives, constraints, model)
    logger.info("ingested %s: %d assets, %d return periods", spec.name, n, len(returns))
    if output is not None:
        save_instance(instance, output)
        logger.info("wrote instance to %s", output)
    return instance


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def feasible_starts(instance: ProblemInstance, poly: Polyhedron, seed: int) -> List[np.ndarray]:
    """Basis vectors and random sparse points, repaired onto Ω when linear rows cut them off."""
    starts = []
    for x in initial_population(instance.n, instance.s, poly, seed):
        if is_feasible(x, poly, instance.s):
            starts.append(x)
            continue
        J = super_supports(x, instance.s)[0]
        if support_feasible(poly, J):
            starts.append(project_onto_support(x, poly, J))
        else:
            logger.debug("start on support %s skipped: support is infeasible", J)
    if not starts:
        raise ConfigurationError(f"no feasible start exists for instance {instance.name}")
    return starts


def _ga_params(cfg: ExperimentConfig, seed: int, long_run: bool = False) -> GaParams:
    generations = cfg.phase1_iterations
    budget = cfg.phase1_budget
    if long_run:
        generations = None if generations is None else int(math.ceil(1.5 * generations))
        budget = None if budget is None else cfg.nsga2_long_budget
    return GaParams(pop_size=cfg.population_size, seed=seed, generations=generations, time_budget=budget)


def phase_one(
    instance: ProblemInstance,
    poly: Polyhedron,
    cfg: ExperimentConfig,
    solver: str,
    seed: int,
) -> tuple[List[EvaluatedPoint], List[dict]]:
    """Run the initialization solver and pair its outputs with super supports.

    Returns:
        (nondominated 𝒳⁰ entries, descent trace rows)
    """
    model, selection, s = instance.model, instance.objectives, instance.s
    objectives = ObjectiveSet(model, selection)
    trace: List[dict] = []
    weights: Dict[int, tuple] = {}

    if solver == "scal":
        grid = lambda_grid(objectives.m, max(cfg.scal_weights, objectives.m))
        front = scalarization_front(model, selection, poly, s, grid, seed=seed)
        candidates = [p.x for p in front.points()]
        weights = {i: p.weights for i, p in enumerate(front.points())}
    elif solver == "mohyb":
        starts = feasible_starts(instance, poly, seed)
        moiht_iter = cfg.phase1_iterations if cfg.phase1_iterations is not None else 1000
        results = mohyb(model, selection, starts, poly, s, moiht_iter=moiht_iter, time_budget=cfg.phase1_budget)
        candidates = [r.x for r in results]
        for k, result in enumerate(results):
            trace += [{"run": k, "stage": result.origin, **row} for row in result.trace]
    elif solver in ("nsga2", "nsga2-long"):
        population = nsga2_run(model, selection, poly, s, _ga_params(cfg, seed, solver == "nsga2-long"))
        candidates = [population.X[i] for i in population.best()]
    elif solver == "nsma":
        population = nsma_run(
            model, selection, poly, s, _ga_params(cfg, seed),
            refine_every=cfg.refine_every, refine_steps=cfg.refine_steps,
        )
        candidates = [population.X[i] for i in population.best()]
    else:
        raise ConfigurationError(f"unknown phase-one solver '{solver}'")

    points = []
    for i, x in enumerate(candidates):
        report = is_feasible(x, poly, s, tol=1e-6)
        if not report:
            logger.warning("%s output dropped: %s", solver, report.summary())
            continue
        points.append(
            EvaluatedPoint(x=x, F=objectives.value(x), J=super_supports(x, s)[0], origin=solver, weights=weights.get(i))
        )
    if not points:
        return [], trace
    keep = nondominated_filter([p.F for p in points])
    return [points[i] for i in keep], trace


def _with_theta(points: Sequence[EvaluatedPoint], objectives: ObjectiveSet, poly: Polyhedron) -> List[EvaluatedPoint]:
    stamped = []
    for point in points:
        try:
            theta = common_direction(point.x, point.J, objectives.jacobian(point.x), poly).theta
        except SparseFrontError as exc:
            logger.debug("theta unavailable for a point on %s: %s", point.J, exc)
            theta = math.nan
        stamped.append(replace(point, theta=float(theta)))
    return stamped


def run_cell(
    instance: ProblemInstance,
    instance_path: str,
    pipeline: str,
    seed: int,
    cfg: ExperimentConfig,
    output_dir: Path,
) -> RunRecord:
    """One (instance, pipeline, seed) run; solver failures are recorded, not raised."""
    record = RunRecord(
        instance=instance.name,
        pipeline=pipeline,
        seed=seed,
        config_hash=config_hash(cfg, instance_path, pipeline),
    )
    solver, _, second = pipeline.partition("+")
    objectives = ObjectiveSet(instance.model, instance.objectives)
    stem = output_dir / instance.name / pipeline / f"seed_{seed}"
    logger.info("run %s / %s / seed %d", instance.name, pipeline, seed)
    started = time.perf_counter()
    try:
        poly = build_polyhedron(instance.constraints, instance.model)
        X0, trace = phase_one(instance, poly, cfg, solver, seed)
        record.phase1_time = time.perf_counter() - started
        if not X0:
            raise SparseFrontError(f"{solver} produced no feasible point")
        logger.info("phase 1 (%s): %d points in %.2fs", solver, len(X0), record.phase1_time)

        front = X0
        if second == "sfsd":
            lineage = LinkedTrace() if cfg.trace else None
            params = SfsdParams(max_iter=cfg.sfsd_iterations, time_budget=cfg.sfsd_budget)
            sfsd_started = time.perf_counter()
            refiner = SfsdSolver(objectives, poly, params, lineage)
            solver_front = refiner.run(X0)
            record.sfsd_time = time.perf_counter() - sfsd_started
            record.sfsd_iterations = refiner.iterations
            record.stop_reason = refiner.stop_reason
            front = solver_front.points()
            if lineage is not None:
                rows = [{"child": c, "parent": p, "iteration": it} for c, (p, it) in sorted(lineage.parents.items())]
                record.lineage_csv = str(write_trace_csv(f"{stem}_lineage.csv", rows))
        final = _with_theta(front, objectives, poly)
        record.front_csv = str(write_front_csv(f"{stem}.csv", final, objectives))
        if cfg.trace and trace:
            record.trace_csv = str(write_trace_csv(f"{stem}_trace.csv", trace))
        record.points = len(final)
        record.supports = len({p.J for p in final})
    except SparseFrontError as exc:
        logger.error("run %s / %s / seed %d failed: %s", instance.name, pipeline, seed, exc)
        record.status = "failed"
        record.error = str(exc)
    record.wall_time = time.perf_counter() - started
    return record


def _mark_best_seeds(records: List[RunRecord], objectives_by_instance: Dict[str, ObjectiveSet]) -> None:
    """Hypervolume per seed against a common reference point; the largest is flagged."""
    cells: Dict[tuple, List[RunRecord]] = {}
    for record in records:
        if record.status == "ok" and record.front_csv:
            cells.setdefault((record.instance, record.pipeline), []).append(record)
    for (name, _), group in cells.items():
        objectives = objectives_by_instance[name]
        fronts = []
        for record in group:
            points = read_front_csv(record.front_csv, objectives)
            fronts.append(np.vstack([p.F for p in points]) if points else np.empty((0, 0)))
        nonempty = [F for F in fronts if F.size]
        if not nonempty:
            continue
        ref = reference_point(np.vstack(nonempty))
        for record, F in zip(group, fronts):
            record.hypervolume = hypervolume(F, ref) if F.size else 0.0
        best = max(group, key=lambda r: (r.hypervolume, -r.seed))
        best.best_seed = True


def run_pipeline(cfg: ExperimentConfig, seeds: Optional[Sequence[int]] = None) -> List[RunRecord]:
    """Run every instance x pipeline x seed cell and write the run manifest."""
    if not cfg.instances:
        raise ConfigurationError("the experiment lists no instances")
    seeds = list(seeds) if seeds is not None else cfg.seeds
    output_dir = Path(cfg.output_dir)
    records: List[RunRecord] = []
    objectives_by_instance: Dict[str, ObjectiveSet] = {}
    cells = [(path, pipeline, seed) for path in cfg.instances for pipeline in cfg.pipelines for seed in seeds]
    instances: Dict[str, ProblemInstance] = {}
    for path, pipeline, seed in tqdm(cells, desc="Running experiment", unit="runs", disable=len(cells) < 2):
        if path not in instances:
            instances[path] = load_instance(path)
            instance = instances[path]
            objectives_by_instance[instance.name] = ObjectiveSet(instance.model, instance.objectives)
        records.append(run_cell(instances[path], path, pipeline, seed, cfg, output_dir))
    _mark_best_seeds(records, objectives_by_instance)
    save_runs(output_dir / RUNS_FILE, records)
    failed = sum(r.status != "ok" for r in records)
    logger.info("experiment finished: %d runs, %d failed", len(records), failed)
    return records


# ---------------------------------------------------------------------------
# Reference fronts and reports
# ---------------------------------------------------------------------------

def _reference_path(output_dir: Path, name: str) -> Path:
    return output_dir / f"reference_{name}.csv"


def write_reference(path: PathLike, reference: ReferenceFront, objectives: ObjectiveSet) -> Path:
    m = objectives.m
    rows = []
    for F, J, source in zip(reference.F, reference.supports, reference.sources):
        natural = objectives.natural(F)
        rows.append({**{f"f_{j + 1}": float(natural[j]) for j in range(m)}, "support": ";".join(map(str, J)), "source": source})
    frame = pd.DataFrame(rows, columns=[f"f_{j + 1}" for j in range(m)] + ["support", "source"])
    return atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def read_reference(path: PathLike, objectives: ObjectiveSet) -> ReferenceFront:
    try:
        frame = pd.read_csv(path, dtype={"support": str, "source": str})
    except OSError as exc:
        raise ConfigurationError(f"cannot read reference front {path}: {exc}") from exc
    f_cols = [c for c in frame.columns if c.startswith("f_")]
    F = objectives.internal(frame[f_cols].to_numpy(dtype=float))
    supports = [tuple(int(i) for i in str(value).split(";")) for value in frame["support"]]
    return ReferenceFront(F, supports, [str(v) for v in frame["source"]])


def build_references(cfg: ExperimentConfig, long_runs: Optional[int] = None) -> Dict[str, ReferenceFront]:
    """Merge every successful run per instance, plus optional long NSGA-II runs, and write the fronts."""
    output_dir = Path(cfg.output_dir)
    records = load_runs(output_dir / RUNS_FILE)
    long_runs = cfg.nsga2_long_runs if long_runs is None else long_runs
    references = {}
    for path in cfg.instances:
        instance = load_instance(path)
        objectives = ObjectiveSet(instance.model, instance.objectives)
        runs: Dict[str, List[EvaluatedPoint]] = {}
        for record in records:
            if record.instance == instance.name and record.status == "ok" and record.front_csv:
                runs[f"{record.pipeline}:{record.seed}"] = read_front_csv(record.front_csv, objectives)
        if long_runs:
            poly = build_polyhedron(instance.constraints, instance.model)
            for k in range(long_runs):
                seed = LONG_RUN_SEED_OFFSET + k
                try:
                    points, _ = phase_one(instance, poly, cfg, "nsga2-long", seed)
                except SparseFrontError as exc:
                    logger.warning("long NSGA-II run %d failed: %s", k, exc)
                    continue
                runs[f"nsga2-long:{seed}"] = points
        if not runs:
            logger.warning("no successful run for instance %s; reference skipped", instance.name)
            continue
        reference = build_reference(runs)
        write_reference(_reference_path(output_dir, instance.name), reference, objectives)
        logger.info("reference for %s: %d points on %d supports", instance.name, len(reference.supports), len(reference.support_set()))
        references[instance.name] = reference
    return references


def _profile_matrix(rows, solvers: List[str], problems: List[str], metric: str) -> np.ndarray:
    values = np.full((len(solvers), len(problems)), np.nan)
    for row in rows:
        value = getattr(row, metric)
        if value is not None and np.isfinite(value):
            values[solvers.index(row.solver), problems.index(row.problem)] = value
    return values


def report(cfg: ExperimentConfig) -> Dict[str, Path]:
    """Metric, profile and plot-data CSVs from the best seed of every (instance, pipeline)."""
    output_dir = Path(cfg.output_dir)
    records = load_runs(output_dir / RUNS_FILE)
    rows = []
    plot_fronts = {}
    for path in cfg.instances:
        instance = load_instance(path)
        objectives = ObjectiveSet(instance.model, instance.objectives)
        ref_file = _reference_path(output_dir, instance.name)
        if ref_file.exists():
            reference = read_reference(ref_file, objectives)
        else:
            reference = build_references(cfg.model_copy(update={"instances": [path]})).get(instance.name)
        if reference is None:
            continue
        fronts: Dict[str, List[EvaluatedPoint]] = {}
        for record in records:
            if record.instance == instance.name and record.best_seed and record.front_csv:
                points = read_front_csv(record.front_csv, objectives)
                if points:
                    points = [points[i] for i in nondominated_filter([p.F for p in points])]
                fronts[record.pipeline] = points
                if points:
                    plot_fronts[(record.pipeline, instance.name)] = np.vstack([objectives.natural(p.F) for p in points])
        if not fronts:
            continue
        rows += evaluate_fronts(fronts, reference, instance.name)

    solvers = sorted({row.solver for row in rows})
    problems = sorted({row.problem for row in rows})
    profiles = {}
    if rows:
        for metric, higher in (("purity", True), ("hv", True), ("gamma", False)):
            profiles[metric] = performance_profile(_profile_matrix(rows, solvers, problems, metric), solvers, higher)
    written = {
        "metrics": write_metrics_csv(output_dir / "metrics.csv", rows),
        "profiles": write_profile_csv(output_dir / "profiles.csv", profiles),
        "plot_data": write_plot_data(output_dir / "plot_data.csv", plot_fronts),
    }
    logger.info("report: %d metric rows over %d problems", len(rows), len(problems))
    return written
