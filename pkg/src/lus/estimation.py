"""Maximum-likelihood fitting for the plain and offset-corrected models.

A damped Newton method minimizes the average negative log-likelihood;
offsets (when present) enter the logits only, so the subsample fit
returns parameters in the original model coordinates with no
post-correction step. The objective is convex, hence the zero start.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .model import (
    Dataset,
    ModelParams,
    _design,
    _hessian_core,
    _label_indicators,
    _log_norm,
    _probs_from_logits,
    batch_probs,
)
from .rng import substream
from .sampling import Subsample

__all__ = [
    "DegenerateFitError",
    "SolverConfig",
    "FitResult",
    "fit_mle",
    "fit_subsample_mle",
    "train_pilot",
    "pilot_probs",
]

_ARMIJO_C1 = 1e-4
_MIN_STEP = 1e-12


class DegenerateFitError(RuntimeError):
    """The likelihood has no finite maximizer for this data."""


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver knobs.

    ``tol`` bounds the sup-norm of the gradient at convergence; ``ridge``
    is a jitter added to the Hessian only when its factorization fails.
    """

    tol: float = 1e-8
    max_iters: int = 100
    ridge: float = 1e-10
    line_search_shrink: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    converged: bool
    iterations: int
    final_grad_norm: float
    objective: float

    def __post_init__(self):
        if self.converged and not np.isfinite(self.final_grad_norm):
            raise ValueError("converged fit must report a finite gradient norm")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "objective": self.objective,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, payload: dict) -> "FitResult":
        return cls(
            params=ModelParams.from_dict(payload["params"]),
            converged=bool(payload["converged"]),
            iterations=int(payload["iterations"]),
            final_grad_norm=float(payload["final_grad_norm"]),
            objective=float(payload["objective"]),
        )

    @classmethod
    def from_json(cls, path) -> "FitResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _solve_newton_step(hess: np.ndarray, grad_flat: np.ndarray, ridge: float) -> np.ndarray | None:
    """Solve ``H step = -g`` by Cholesky, jittering the diagonal on failure."""
    eye = np.eye(hess.shape[0])
    for jitter in (0.0, ridge, ridge * 1e4, ridge * 1e8):
        try:
            factor = scipy.linalg.cho_factor(hess + jitter * eye, lower=True)
            return scipy.linalg.cho_solve(factor, -grad_flat)
        except scipy.linalg.LinAlgError:
            continue
    return None


def _newton(
    design: np.ndarray,
    labels: np.ndarray,
    k: int,
    offsets: np.ndarray | None,
    config: SolverConfig,
    trace: list | None = None,
) -> FitResult:
    n, dp1 = design.shape
    coeffs = np.zeros((k - 1, dp1))
    indicators = _label_indicators(labels, k)

    def objective(c: np.ndarray) -> float:
        g = design @ c.T
        if offsets is not None:
            g = g + offsets
        lse = _log_norm(g)
        g_obs = (g * indicators).sum(axis=1)
        return float((lse - g_obs).sum() / n)

    obj = objective(coeffs)
    grad_norm = np.inf
    iterations = 0
    converged = False
    if trace is not None:
        trace.append(obj)

    for _ in range(config.max_iters):
        g = design @ coeffs.T
        if offsets is not None:
            g = g + offsets
        probs = _probs_from_logits(g)
        resid = indicators - probs[:, :-1]
        grad = -(resid.T @ design) / n
        grad_norm = float(np.abs(grad).max())
        if grad_norm <= config.tol:
            converged = True
            break
        hess = _hessian_core(design, probs, None)
        step_flat = _solve_newton_step(hess, grad.ravel(), config.ridge)
        if step_flat is None:
            break
        step = step_flat.reshape(coeffs.shape)
        slope = float(grad.ravel() @ step_flat)
        if slope >= 0:
            break
        t = 1.0
        while True:
            candidate = coeffs + t * step
            cand_obj = objective(candidate)
            if cand_obj <= obj + _ARMIJO_C1 * t * slope:
                break
            t *= config.line_search_shrink
            if t < _MIN_STEP:
                candidate = None
                break
        if candidate is None:
            break
        coeffs = candidate
        obj = cand_obj
        iterations += 1
        if trace is not None:
            trace.append(obj)

    if not converged:
        g = design @ coeffs.T
        if offsets is not None:
            g = g + offsets
        probs = _probs_from_logits(g)
        resid = indicators - probs[:, :-1]
        grad_norm = float(np.abs(-(resid.T @ design) / n).max())
        converged = grad_norm <= config.tol

    return FitResult(
        params=ModelParams(coeffs),
        converged=converged,
        iterations=iterations,
        final_grad_norm=grad_norm,
        objective=obj,
    )


def fit_mle(data: Dataset, config: SolverConfig | None = None, trace: list | None = None) -> FitResult:
    """Fit the plain multi-class logistic MLE on the full dataset.

    Raises :class:`DegenerateFitError` when the dataset is empty or some
    class has no observations (its intercept would diverge).
    """
    config = config or SolverConfig()
    if data.n == 0:
        raise DegenerateFitError("cannot fit an empty dataset")
    counts = data.class_counts()
    missing = np.nonzero(counts == 0)[0]
    if missing.size:
        raise DegenerateFitError(f"class {missing[0] + 1} has no observations")
    return _newton(_design(data.features), data.labels, data.k, None, config, trace)


def fit_subsample_mle(sub: Subsample, config: SolverConfig | None = None, trace: list | None = None) -> FitResult:
    """Fit the offset-corrected MLE on a subsample.

    The offsets shift the logits only; the returned parameters live in
    the original model coordinates. Raises :class:`DegenerateFitError`
    for an empty or single-class subsample.
    """
    config = config or SolverConfig()
    if sub.size == 0:
        raise DegenerateFitError("cannot fit an empty subsample")
    if np.unique(sub.labels).size < 2:
        raise DegenerateFitError("subsample contains a single class")
    return _newton(_design(sub.features), sub.labels, sub.k, sub.offsets, config, trace)


def train_pilot(data: Dataset, fraction: float, seed: int, config: SolverConfig | None = None) -> ModelParams:
    """Fit a pilot model on a uniform Bernoulli(``fraction``) subsample.

    On a degenerate draw (some class missing) the fraction is doubled and
    the draw retried once before the error propagates.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    mask = substream(seed, "pilot").random(data.n) < fraction
    try:
        return fit_mle(data.subset(mask), config).params
    except DegenerateFitError:
        retry_fraction = min(1.0, 2.0 * fraction)
        mask = substream(seed, "pilot-retry").random(data.n) < retry_fraction
        return fit_mle(data.subset(mask), config).params


def pilot_probs(params: ModelParams, data: Dataset) -> np.ndarray:
    """Pilot class probabilities ``(n, k)`` aligned with the dataset rows."""
    return batch_probs(params, data.features)
