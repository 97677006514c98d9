"""Front-quality metrics, support recall, reference fronts and performance profiles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .exceptions import PreconditionError
from .models import EvaluatedPoint, SupportSet, dominance_matrix, nondominated_filter

logger = logging.getLogger(__name__)

DEDUPE_TOL = 1e-9


def _matrix(front: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    F = np.asarray(front, dtype=float)
    if F.size == 0:
        return F.reshape(0, 0)
    return F if F.ndim == 2 else F[None, :]


def purity(fronts: Mapping[str, Sequence[Sequence[float]]]) -> dict[str, float]:
    """Share of each solver's points that survive strict dominance in the merged front.

    Exact ties survive for every solver producing them.
    """
    if len(fronts) < 2:
        raise PreconditionError("purity compares at least two solvers")
    labels = []
    blocks = []
    for name, front in fronts.items():
        F = _matrix(front)
        if F.shape[0]:
            blocks.append(F)
            labels += [name] * F.shape[0]
    result = {name: 0.0 for name in fronts}
    if not blocks:
        return result
    union = np.vstack(blocks)
    survivors = ~dominance_matrix(union).any(axis=0)
    for name in fronts:
        mine = np.array([label == name for label in labels])
        if mine.any():
            result[name] = float(survivors[mine].sum() / mine.sum())
    return result


def _dedupe(F: np.ndarray, tol: float = DEDUPE_TOL) -> np.ndarray:
    kept: list[np.ndarray] = []
    for row in F:
        if not any(np.max(np.abs(row - other)) <= tol for other in kept):
            kept.append(row)
    return np.vstack(kept)


def gamma_spread(front: Sequence[Sequence[float]]) -> float:
    """Largest l-infinity gap between neighbours along any single objective."""
    F = _matrix(front)
    if F.shape[0] == 0:
        raise PreconditionError("gamma spread of an empty front")
    if F.shape[0] == 1:
        return math.inf
    F = _dedupe(F)
    if F.shape[0] == 1:
        return 0.0
    largest = 0.0
    for j in range(F.shape[1]):
        ordered = F[np.argsort(F[:, j], kind="stable")]
        gaps = np.max(np.abs(np.diff(ordered, axis=0)), axis=1)
        largest = max(largest, float(gaps.max()))
    return largest


def _hv2(F: np.ndarray, ref: np.ndarray) -> float:
    ordered = F[np.lexsort((F[:, 1], F[:, 0]))]
    area = 0.0
    ceiling = ref[1]
    for f1, f2 in ordered:
        if f2 < ceiling:
            area += (ref[0] - f1) * (ceiling - f2)
            ceiling = f2
    return area


def _hv(F: np.ndarray, ref: np.ndarray) -> float:
    if F.shape[0] == 0:
        return 0.0
    m = F.shape[1]
    if m == 1:
        return float(ref[0] - F[:, 0].min())
    if m == 2:
        return _hv2(F, ref)
    # Slice along the last objective
    ordered = F[np.argsort(F[:, -1], kind="stable")]
    volume = 0.0
    for i in range(ordered.shape[0]):
        upper = ordered[i + 1, -1] if i + 1 < ordered.shape[0] else ref[-1]
        depth = upper - ordered[i, -1]
        if depth <= 0:
            continue
        section = ordered[: i + 1, :-1]
        section = section[nondominated_filter(section)]
        volume += depth * _hv(section, ref[:-1])
    return volume


def hypervolume(front: Sequence[Sequence[float]], reference_point: Sequence[float]) -> float:
    """Volume dominated by ``front`` and bounded by ``reference_point`` (minimisation)."""
    F = _matrix(front)
    ref = np.asarray(reference_point, dtype=float)
    if F.shape[0] == 0:
        return 0.0
    if F.shape[1] != ref.shape[0]:
        raise PreconditionError("reference point and front differ in dimension")
    inside = np.all(F <= ref, axis=1)
    if not inside.all():
        logger.warning("hypervolume: dropped %d points beyond the reference point", int((~inside).sum()))
    F = F[inside]
    if F.shape[0] == 0:
        return 0.0
    F = F[nondominated_filter(F)]
    return float(_hv(F, ref))


def recall(solver_supports: Iterable[SupportSet], reference_supports: Iterable[SupportSet]) -> float:
    reference = {tuple(J) for J in reference_supports}
    if not reference:
        raise PreconditionError("recall is undefined for an empty reference")
    found = {tuple(J) for J in solver_supports}
    return len(found & reference) / len(reference)


@dataclass
class ReferenceFront:
    """Merged nondominated front across runs, with the supports of its points."""

    F: np.ndarray
    supports: list[SupportSet]
    sources: list[str] = field(default_factory=list)

    def support_set(self) -> set[SupportSet]:
        return set(self.supports)


def build_reference(runs: Mapping[str, Iterable[EvaluatedPoint]]) -> ReferenceFront:
    """Union of all runs, deduplicated on (F, support) and nondominated-filtered."""
    if not runs:
        raise PreconditionError("reference needs at least one run")
    rows: list[np.ndarray] = []
    supports: list[SupportSet] = []
    sources: list[str] = []
    seen: set[tuple] = set()
    for label, points in runs.items():
        for point in points:
            key = (tuple(np.asarray(point.F, dtype=float)), point.J)
            if key in seen:
                continue
            seen.add(key)
            rows.append(np.asarray(point.F, dtype=float))
            supports.append(point.J)
            sources.append(label)
    if not rows:
        return ReferenceFront(np.empty((0, 0)), [], [])
    F = np.vstack(rows)
    keep = nondominated_filter(F)
    return ReferenceFront(F[keep], [supports[i] for i in keep], [sources[i] for i in keep])


def reference_point(F: np.ndarray, margin: float = 0.1) -> np.ndarray:
    """Nadir shifted by ``margin`` times the per-objective range (or the nadir magnitude when flat)."""
    F = _matrix(F)
    if F.shape[0] == 0:
        raise PreconditionError("reference point of an empty front")
    nadir = F.max(axis=0)
    span = nadir - F.min(axis=0)
    offset = np.where(span > 0, margin * span, margin * np.maximum(np.abs(nadir), 1.0))
    return nadir + offset


def performance_profile(
    values: np.ndarray,
    solvers: Sequence[str],
    higher_is_better: bool,
) -> dict[str, list[tuple[float, float]]]:
    """Dolan-More profiles of a solver x problem matrix; NaN cells count as failures.

    Returns:
        For each solver, (tau, fraction of problems within ratio tau of the best)
    """
    V = np.atleast_2d(np.asarray(values, dtype=float))
    if V.shape[0] != len(solvers):
        raise PreconditionError("one row of values per solver is required")
    ratios = np.full(V.shape, np.inf)
    for p in range(V.shape[1]):
        column = V[:, p]
        valid = ~np.isnan(column)
        if not valid.any():
            continue
        best = column[valid].max() if higher_is_better else column[valid].min()
        for i in np.flatnonzero(valid):
            value = column[i]
            if value == best:
                ratios[i, p] = 1.0
            elif higher_is_better:
                ratios[i, p] = best / value if value > 0 else np.inf
            else:
                ratios[i, p] = value / best if best > 0 else np.inf
    taus = np.unique(np.concatenate([[1.0], ratios[np.isfinite(ratios)]]))
    problems = V.shape[1]
    return {
        solver: [(float(tau), float(np.sum(ratios[i] <= tau) / problems)) for tau in taus]
        for i, solver in enumerate(solvers)
    }


@dataclass
class MetricReport:
    solver: str
    problem: str
    purity: float
    gamma: float
    hv: float
    recall: float


def evaluate_fronts(
    fronts: Mapping[str, Sequence[EvaluatedPoint]],
    reference: ReferenceFront,
    problem: str,
    ref_point: Optional[np.ndarray] = None,
) -> list[MetricReport]:
    """Metric rows for every solver front of one problem."""
    if ref_point is None:
        ref_point = reference_point(reference.F)
    matrices = {name: np.vstack([p.F for p in points]) if points else np.empty((0, 0)) for name, points in fronts.items()}
    if len(matrices) >= 2:
        purities = purity(matrices)
    else:
        purities = {name: 1.0 if len(points) else 0.0 for name, points in fronts.items()}
    rows = []
    for name, points in fronts.items():
        F = matrices[name]
        rows.append(
            MetricReport(
                solver=name,
                problem=problem,
                purity=purities[name],
                gamma=gamma_spread(F) if F.shape[0] else math.inf,
                hv=hypervolume(F, ref_point),
                recall=recall((p.J for p in points), reference.supports) if reference.supports else math.nan,
            )
        )
    return rows
