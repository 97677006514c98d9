from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, config
from .exceptions import ConfigurationError, NumericalError, PreconditionError, SparseFrontError
from .routers import instances, metrics

app = FastAPI(
    title="Sparse Front Service",
    description="Evaluate, scalarize and score sparse multi-objective portfolios.",
    version=__version__
)

app.include_router(instances.router)
app.include_router(metrics.router)


@app.exception_handler(ConfigurationError)
def configuration_error(request: Request, exc: ConfigurationError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(PreconditionError)
def precondition_error(request: Request, exc: PreconditionError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(NumericalError)
def numerical_error(request: Request, exc: NumericalError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(SparseFrontError)
def solver_error(request: Request, exc: SparseFrontError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/")
def index():
    return {
        "service": app.title,
        "version": __version__,
        "threads": config.NUM_THREADS,
    }
