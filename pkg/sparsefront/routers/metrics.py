import math

from fastapi import APIRouter, HTTPException
import numpy as np

from ..metrics import gamma_spread, hypervolume, purity, reference_point
from ..schemas import MetricsRequest, MetricsResponse, SolverMetrics

router = APIRouter(
    prefix="/metrics",
    tags=["metrics"]
)


@router.post("/", response_model=MetricsResponse)
def compute_metrics(payload: MetricsRequest):
    fronts = {name: np.asarray(rows, dtype=float) for name, rows in payload.fronts.items()}
    nonempty = [F for F in fronts.values() if F.size]
    if not nonempty:
        raise HTTPException(status_code=422, detail="at least one front must contain points")

    if payload.reference_point is not None:
        ref = np.asarray(payload.reference_point, dtype=float)
    else:
        ref = reference_point(np.vstack(nonempty))
    purities = purity(fronts) if len(fronts) >= 2 else {}

    results = []
    for name, F in fronts.items():
        gamma = gamma_spread(F) if F.size else None
        results.append(
            SolverMetrics(
                solver=name,
                points=int(F.shape[0]) if F.size else 0,
                purity=purities.get(name),
                # JSON has no infinity: a single-point front reports no spread
                gamma=gamma if gamma is not None and math.isfinite(gamma) else None,
                hv=hypervolume(F, ref),
            )
        )

    return MetricsResponse(reference_point=ref.tolist(), results=results)
