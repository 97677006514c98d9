"""Result files: front, trace, metric and profile CSVs, instance JSON and the run manifest.

Every file is written to a temporary sibling and moved into place with ``os.replace``.
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from .exceptions import ConfigurationError, DataError
from .metrics import MetricReport
from .models import EvaluatedPoint, ProblemInstance
from .objectives import ObjectiveSet
from .schemas import InstanceDocument, RunRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


@retry(
    retry=retry_if_exception_type(PermissionError),
    stop=stop_after_attempt(5),
    wait=wait_fixed(0.2),
    reraise=True,
)
def _replace(source: str, target: Path) -> None:
    os.replace(source, target)


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        _replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    return atomic_write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def front_frame(points: Iterable[EvaluatedPoint], objectives: ObjectiveSet) -> pd.DataFrame:
    """Front rows in natural orientation, ordered by support then f_1."""
    m, n = objectives.m, objectives.n
    rows = []
    with_weights = False
    for point in points:
        natural = objectives.natural(point.F)
        row = {f"f_{j + 1}": float(natural[j]) for j in range(m)}
        row.update({f"x_{i + 1}": float(point.x[i]) for i in range(n)})
        row["support"] = ";".join(str(i) for i in point.J)
        row["theta"] = float(point.theta)
        row["origin"] = point.origin
        if point.weights is not None:
            with_weights = True
            row.update({f"lambda_{j + 1}": float(w) for j, w in enumerate(point.weights)})
        row["_J"] = point.J
        rows.append(row)
    columns = [f"f_{j + 1}" for j in range(m)] + [f"x_{i + 1}" for i in range(n)] + ["support", "theta", "origin"]
    if with_weights:
        columns += [f"lambda_{j + 1}" for j in range(m)]
    if not rows:
        return pd.DataFrame(columns=columns)
    rows.sort(key=lambda r: (r["_J"], r["f_1"]))
    return pd.DataFrame(rows).reindex(columns=columns)


def write_front_csv(path: PathLike, points: Iterable[EvaluatedPoint], objectives: ObjectiveSet) -> Path:
    return _write_frame(front_frame(points, objectives), path)


def read_front_csv(path: PathLike, objectives: Optional[ObjectiveSet] = None) -> List[EvaluatedPoint]:
    """Read a front CSV back into points.

    With ``objectives`` the natural values are converted to the internal
    minimisation convention; without it F keeps the file's orientation.
    """
    try:
        frame = pd.read_csv(path, dtype={"support": str, "origin": str}, keep_default_na=True)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot read front CSV {path}: {exc}") from exc
    f_cols = [c for c in frame.columns if c.startswith("f_")]
    x_cols = [c for c in frame.columns if c.startswith("x_")]
    l_cols = [c for c in frame.columns if c.startswith("lambda_")]
    if not f_cols or not x_cols or "support" not in frame.columns:
        raise DataError(f"{path} is not a front CSV (needs f_*, x_* and support columns)")
    points = []
    for row_number, row in enumerate(frame.itertuples(index=False), start=2):
        record = row._asdict()
        F = np.array([record[c] for c in f_cols], dtype=float)
        if objectives is not None:
            F = objectives.internal(F)
        try:
            J = tuple(int(i) for i in str(record["support"]).split(";") if i != "")
        except ValueError as exc:
            raise DataError(f"{path}, row {row_number}: malformed support '{record['support']}'") from exc
        weights = None
        if l_cols and not any(pd.isna(record[c]) for c in l_cols):
            weights = tuple(float(record[c]) for c in l_cols)
        theta = record.get("theta", math.nan)
        points.append(
            EvaluatedPoint(
                x=np.array([record[c] for c in x_cols], dtype=float),
                F=F,
                J=J,
                theta=math.nan if pd.isna(theta) else float(theta),
                origin="" if pd.isna(record.get("origin", "")) else str(record.get("origin", "")),
                weights=weights,
            )
        )
    return points


def write_trace_csv(path: PathLike, rows: Sequence[Mapping]) -> Path:
    frame = pd.DataFrame(list(rows))
    if "support" in frame.columns:
        frame["support"] = [";".join(str(i) for i in J) if isinstance(J, tuple) else "" for J in frame["support"]]
    return _write_frame(frame, path)


def write_metrics_csv(path: PathLike, reports: Sequence[MetricReport]) -> Path:
    columns = ["solver", "problem", "purity", "gamma", "hv", "recall"]
    frame = pd.DataFrame([{c: getattr(r, c) for c in columns} for r in reports], columns=columns)
    return _write_frame(frame, path)


def write_profile_csv(path: PathLike, profiles: Mapping[str, Mapping[str, Sequence[tuple[float, float]]]]) -> Path:
    """``profiles`` maps metric name -> solver -> (tau, fraction) steps."""
    rows = [
        {"metric": metric, "solver": solver, "tau": tau, "fraction": fraction}
        for metric, by_solver in profiles.items()
        for solver, steps in by_solver.items()
        for tau, fraction in steps
    ]
    return _write_frame(pd.DataFrame(rows, columns=["metric", "solver", "tau", "fraction"]), path)


def write_plot_data(path: PathLike, fronts: Mapping[tuple[str, str], np.ndarray]) -> Path:
    """Natural-orientation objective rows keyed by (solver, problem)."""
    rows = []
    width = 0
    for (solver, problem), F in fronts.items():
        F = np.atleast_2d(F)
        for values in F:
            width = max(width, len(values))
            rows.append({"solver": solver, "problem": problem, **{f"f_{j + 1}": float(v) for j, v in enumerate(values)}})
    columns = ["solver", "problem"] + [f"f_{j + 1}" for j in range(width)]
    return _write_frame(pd.DataFrame(rows, columns=columns), path)


def save_instance(instance: ProblemInstance, path: PathLike) -> Path:
    document = InstanceDocument.from_instance(instance)
    return atomic_write_text(path, document.model_dump_json(indent=2))


def load_instance(path: PathLike) -> ProblemInstance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read instance {path}: {exc}") from exc
    try:
        document = InstanceDocument.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid instance document {path}: {exc}") from exc
    return document.to_instance()


def save_runs(path: PathLike, records: Sequence[RunRecord]) -> Path:
    payload = [record.model_dump() for record in records]
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True))


def load_runs(path: PathLike) -> List[RunRecord]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return [RunRecord.model_validate(item) for item in payload]
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigurationError(f"cannot load run manifest {path}: {exc}") from exc
