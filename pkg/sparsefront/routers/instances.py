from fastapi import APIRouter, HTTPException
import numpy as np

from ..constraints import build_polyhedron, is_feasible
from ..models import support_of
from ..objectives import ObjectiveSet
from ..scalarization import scalarize_solve
from ..schemas import EvaluateRequest, EvaluateResponse, ScalarizeRequest, ScalarizeResponse

router = APIRouter(
    prefix="/instances",
    tags=["instances"]
)


@router.post("/evaluate", response_model=EvaluateResponse)
def evaluate_portfolio(payload: EvaluateRequest):
    instance = payload.instance.to_instance()
    x = np.asarray(payload.x, dtype=float)
    if x.shape != (instance.n,):
        raise HTTPException(status_code=422, detail=f"x must have {instance.n} weights")

    objectives = ObjectiveSet(instance.model, instance.objectives)
    poly = build_polyhedron(instance.constraints, instance.model)
    report = is_feasible(x, poly, instance.s)

    return EvaluateResponse(
        objectives=objectives.natural(objectives.value(x)).tolist(),
        support=list(support_of(x)),
        feasible=report.feasible,
        violations=[str(v) for v in report.violations],
    )


@router.post("/scalarize", response_model=ScalarizeResponse)
def scalarize(payload: ScalarizeRequest):
    instance = payload.instance.to_instance()
    poly = build_polyhedron(instance.constraints, instance.model)
    result = scalarize_solve(
        instance.model,
        instance.objectives,
        payload.weights,
        poly,
        instance.s,
        budget=payload.budget,
        seed=payload.seed,
    )
    objectives = ObjectiveSet(instance.model, instance.objectives)

    return ScalarizeResponse(
        x=result.x.tolist(),
        value=result.value,
        objectives=objectives.natural(objectives.value(result.x)).tolist(),
        support=list(result.support),
        optimal=result.optimal,
        method=result.method,
    )
