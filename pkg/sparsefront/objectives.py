"""Portfolio objectives, their gradients and the sample estimation of market parameters.

Internally every objective is minimised: maximised objectives are negated at
evaluation and ``ObjectiveSet.natural`` restores the reported sign.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import config
from .exceptions import ConfigurationError, DataError, DomainError

logger = logging.getLogger(__name__)

OBJECTIVE_IDS = ("ER", "V", "ESG", "SR", "SW")

NATIVE_SENSE = {
    "ER": "max",
    "V": "min",
    "ESG": "max",
    "SR": "max",
    "SW": "max",
}

# Model fields each objective reads
REQUIRED_FIELDS = {
    "ER": ("c",),
    "V": ("Q",),
    "ESG": ("esg",),
    "SR": ("c", "Q"),
    "SW": ("coskew",),
}


@dataclass(frozen=True)
class ObjectiveTerm:
    """One selected objective: identifier, positive scale and orientation."""

    id: str
    scale: float = 1.0
    sense: Optional[str] = None

    def __post_init__(self) -> None:
        if self.id not in OBJECTIVE_IDS:
            raise ConfigurationError(f"unknown objective '{self.id}', expected one of {OBJECTIVE_IDS}")
        if not self.scale > 0:
            raise ConfigurationError(f"scale of objective {self.id} must be positive, got {self.scale}")
        sense = self.sense or NATIVE_SENSE[self.id]
        if sense not in ("min", "max"):
            raise ConfigurationError(f"sense must be 'min' or 'max', got '{sense}'")
        object.__setattr__(self, "sense", sense)

    @property
    def sign(self) -> float:
        return -1.0 if self.sense == "max" else 1.0


@dataclass(frozen=True, eq=False)
class ObjectiveModel:
    """Market parameters: expected returns, covariance, ESG scores, coskewness and betas.

    For large universes ``coskew`` may be omitted in favour of ``centered_returns``;
    skewness is then contracted on the fly from the return series.
    """

    c: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    esg: Optional[np.ndarray] = None
    coskew: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    centered_returns: Optional[np.ndarray] = None
    ddof: int = 0

    def __post_init__(self) -> None:
        for name in ("c", "Q", "esg", "coskew", "beta", "centered_returns"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=float))
        n = self.n
        for name in ("c", "esg", "beta"):
            value = getattr(self, name)
            if value is not None and value.shape != (n,):
                raise ConfigurationError(f"{name} must have shape ({n},), got {value.shape}")
        if self.Q is not None:
            if self.Q.shape != (n, n):
                raise ConfigurationError(f"Q must have shape ({n}, {n}), got {self.Q.shape}")
            if not np.allclose(self.Q, self.Q.T, rtol=0.0, atol=1e-10):
                raise ConfigurationError("covariance matrix Q is not symmetric")
            if np.linalg.eigvalsh(self.Q).min() < -1e-8:
                raise ConfigurationError("covariance matrix Q is not positive semi-definite")
        if self.coskew is not None:
            C = self.coskew
            if C.shape != (n, n, n):
                raise ConfigurationError(f"coskewness tensor must have shape ({n}, {n}, {n}), got {C.shape}")
            for axes in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
                if not np.allclose(C, C.transpose(axes), rtol=0.0, atol=1e-10):
                    raise ConfigurationError("coskewness tensor is not symmetric")
        if self.centered_returns is not None and self.centered_returns.shape[1] != n:
            raise ConfigurationError("centered returns do not match the asset count")

    @property
    def n(self) -> int:
        for name in ("c", "esg", "beta"):
            value = getattr(self, name)
            if value is not None:
                return value.shape[0]
        if self.Q is not None:
            return self.Q.shape[0]
        if self.coskew is not None:
            return self.coskew.shape[0]
        if self.centered_returns is not None:
            return self.centered_returns.shape[1]
        raise ConfigurationError("objective model carries no parameters")

    def provides(self, field_name: str) -> bool:
        if field_name == "coskew":
            return self.coskew is not None or self.centered_returns is not None
        return getattr(self, field_name) is not None


def check_selection(model: ObjectiveModel, selection: Sequence[ObjectiveTerm]) -> None:
    """Raise ConfigurationError when a selected objective lacks model parameters."""
    if not selection:
        raise ConfigurationError("at least one objective must be selected")
    for term in selection:
        missing = [name for name in REQUIRED_FIELDS[term.id] if not model.provides(name)]
        if missing:
            raise ConfigurationError(f"objective {term.id} requires model fields {missing}")


def _variance(model: ObjectiveModel, x: np.ndarray) -> float:
    return 0.5 * float(x @ model.Q @ x)


def _skewness(model: ObjectiveModel, x: np.ndarray) -> float:
    if model.coskew is not None:
        return float(np.einsum("ijk,i,j,k->", model.coskew, x, x, x))
    R = model.centered_returns
    return float(np.sum((R @ x) ** 3)) / (R.shape[0] - model.ddof)


def _skewness_gradient(model: ObjectiveModel, x: np.ndarray) -> np.ndarray:
    if model.coskew is not None:
        return 3.0 * np.einsum("ijk,j,k->i", model.coskew, x, x)
    R = model.centered_returns
    return 3.0 * R.T @ (R @ x) ** 2 / (R.shape[0] - model.ddof)


def raw_value(model: ObjectiveModel, objective_id: str, x: np.ndarray) -> float:
    if objective_id == "ER":
        return float(model.c @ x)
    if objective_id == "V":
        return _variance(model, x)
    if objective_id == "ESG":
        return float(model.esg @ x)
    if objective_id == "SR":
        variance = _variance(model, x)
        if variance <= 0:
            raise DomainError("Sharpe ratio is undefined at a zero-variance portfolio")
        return float(model.c @ x) / np.sqrt(variance)
    return _skewness(model, x)


def raw_gradient(model: ObjectiveModel, objective_id: str, x: np.ndarray) -> np.ndarray:
    if objective_id == "ER":
        return model.c.copy()
    if objective_id == "V":
        return model.Q @ x
    if objective_id == "ESG":
        return model.esg.copy()
    if objective_id == "SR":
        variance = _variance(model, x)
        if variance <= 0:
            raise DomainError("Sharpe ratio is undefined at a zero-variance portfolio")
        expected = float(model.c @ x)
        return model.c / np.sqrt(variance) - expected * (model.Q @ x) / (2.0 * variance ** 1.5)
    return _skewness_gradient(model, x)


class ObjectiveSet:
    """Vector objective F for a model and an ordered selection, in minimisation form."""

    def __init__(self, model: ObjectiveModel, selection: Sequence[ObjectiveTerm]):
        check_selection(model, selection)
        self.model = model
        self.terms = tuple(selection)
        self.signs = np.array([term.sign * term.scale for term in self.terms])
        self.orientation = np.array([term.sign for term in self.terms])

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def n(self) -> int:
        return self.model.n

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        raw = np.array([raw_value(self.model, term.id, x) for term in self.terms])
        return self.signs * raw

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        rows = [raw_gradient(self.model, term.id, x) for term in self.terms]
        return self.signs[:, None] * np.vstack(rows)

    def natural(self, F: np.ndarray) -> np.ndarray:
        """Internal values with the native orientation restored (scales are kept)."""
        return self.orientation * np.asarray(F, dtype=float)

    def internal(self, F_natural: np.ndarray) -> np.ndarray:
        return self.orientation * np.asarray(F_natural, dtype=float)


class WeightedSum:
    """Single-objective view sum_j w_j f_j of an objective set."""

    def __init__(self, objectives: ObjectiveSet, weights: Sequence[float]):
        self.objectives = objectives
        self.weights = np.asarray(weights, dtype=float)
        self.n = objectives.n
        self.m = 1

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.weights @ self.objectives.value(x)])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return (self.weights @ self.objectives.jacobian(x))[None, :]


def eval_objectives(model: ObjectiveModel, selection: Sequence[ObjectiveTerm], x: Sequence[float]) -> np.ndarray:
    return ObjectiveSet(model, selection).value(np.asarray(x, dtype=float))


def grad_objectives(model: ObjectiveModel, selection: Sequence[ObjectiveTerm], x: Sequence[float]) -> np.ndarray:
    return ObjectiveSet(model, selection).jacobian(np.asarray(x, dtype=float))


def lipschitz_constants(objectives: ObjectiveSet, samples: int = 1000, seed: int = 0) -> np.ndarray:
    """Per-objective gradient Lipschitz constants.

    Exact for linear and variance terms; sampled over pairs of simplex points for the
    Sharpe ratio and skewness, so those entries are estimates.
    """
    model = objectives.model
    rng = np.random.default_rng(seed)
    constants = np.zeros(objectives.m)
    for j, term in enumerate(objectives.terms):
        if term.id in ("ER", "ESG"):
            continue
        if term.id == "V":
            constants[j] = term.scale * max(float(np.linalg.eigvalsh(model.Q).max()), 0.0)
            continue
        ratios = []
        for _ in range(samples):
            x, y = rng.dirichlet(np.ones(objectives.n), size=2)
            gap = np.linalg.norm(x - y)
            if gap == 0:
                continue
            try:
                diff = raw_gradient(model, term.id, x) - raw_gradient(model, term.id, y)
            except DomainError:
                continue
            ratios.append(np.linalg.norm(diff) / gap)
        constants[j] = term.scale * (max(ratios) if ratios else 0.0)
    return constants


def default_lipschitz(objectives: ObjectiveSet) -> float:
    """1.1 times the largest gradient Lipschitz constant (1.0 for purely linear selections)."""
    largest = float(lipschitz_constants(objectives).max())
    return 1.1 * largest if largest > 0 else 1.0


def returns_from_prices(prices: pd.DataFrame, log_returns: bool = False) -> pd.DataFrame:
    """Per-period returns from adjusted prices; the first row is consumed."""
    if log_returns:
        return np.log(prices / prices.shift(1)).iloc[1:]
    return prices.pct_change().iloc[1:]


def estimate_model(
    returns: np.ndarray,
    market_returns: np.ndarray,
    esg_scores: Optional[np.ndarray] = None,
    ddof: int = 0,
) -> ObjectiveModel:
    """Sample estimates of every model parameter from a T x n return matrix.

    Covariance, coskewness and betas divide by T - ddof (population moments by default).
    """
    R = np.asarray(returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    T, n = R.shape
    if T < 2:
        raise DataError(f"at least two return periods are required, got {T}")
    if not np.all(np.isfinite(R)):
        raise DataError("return matrix contains missing or non-finite values")
    rm = np.asarray(market_returns, dtype=float)
    if rm.shape != (T,):
        raise DataError(f"market returns must have length {T}, got {rm.shape}")
    if not np.all(np.isfinite(rm)):
        raise DataError("market returns contain missing or non-finite values")

    divisor = T - ddof
    c = R.mean(axis=0)
    D = R - c
    Q = D.T @ D / divisor
    Q = 0.5 * (Q + Q.T)

    dm = rm - rm.mean()
    market_variance = float(dm @ dm) / divisor
    if market_variance <= 0:
        raise DataError("market return variance is zero; betas cannot be estimated")
    beta = (D.T @ dm / divisor) / market_variance

    if n <= config.COSKEW_DENSE_MAX:
        coskew = np.einsum("ti,tj,tk->ijk", D, D, D) / divisor
        centered = None
    else:
        logger.info("using on-the-fly skewness contraction for %d assets", n)
        coskew = None
        centered = D

    esg = None if esg_scores is None else np.asarray(esg_scores, dtype=float)
    return ObjectiveModel(c=c, Q=Q, esg=esg, coskew=coskew, beta=beta, centered_returns=centered, ddof=ddof)
