"""Closed-form asymptotic variance and variance-dominance checks.

The per-point information kernel is the (k-1)x(k-1) matrix
``S = diag(p*) - p* p*^T / sum_k p*_k`` with ``p*_k = a_k p_k``; the
inverse of its feature-weighted average is the asymptotic covariance of
``sqrt(n) (theta_hat - theta*)``. Uniform acceptance scales ``S`` by the
constant, so sampling a ``1/gamma`` fraction inflates the variance by
exactly ``gamma``; the uncertainty-driven acceptance never does worse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .model import Dataset, ModelParams, _design, batch_probs
from .sampling import AcceptanceVector, expected_fractions, lus_acceptance

__all__ = [
    "SingularInformationError",
    "PointSMatrix",
    "VarianceEstimate",
    "point_s_matrix",
    "dominance_margin",
    "closed_form_variance",
    "empirical_variance",
    "expected_subsample_size",
]


class SingularInformationError(RuntimeError):
    """The averaged information matrix is not positive definite."""


@dataclass(frozen=True)
class PointSMatrix:
    """Information kernel at one evaluation point."""

    s: np.ndarray
    at_x: object = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("s must be square")
        if np.abs(s - s.T).max(initial=0.0) > 1e-12:
            raise ValueError("s must be symmetric")
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class VarianceEstimate:
    """Asymptotic covariance of the stacked estimator, ``(k-1)(d+1)`` square."""

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        if self.kind not in ("closed_form", "empirical"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "matrix", matrix)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "matrix": self.matrix.tolist()}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _acceptance_array(a, k: int) -> np.ndarray:
    if isinstance(a, AcceptanceVector):
        a = a.a
    a = np.asarray(a, dtype=float)
    if a.shape != (k,):
        raise ValueError(f"acceptance must have length {k}")
    if np.any(a <= 0) or np.any(a > 1):
        raise ValueError("acceptance probabilities must lie in (0, 1]")
    return a


def point_s_matrix(p, a=None, at_x=None) -> PointSMatrix:
    """Kernel ``diag(p*) - p* p*^T / sum(p*)`` with ``p*_k = a_k p_k``.

    ``a`` absent means accept-everything (``a == 1``), i.e. the full-data
    kernel. The diagonal and outer product run over classes ``1..k-1``;
    the normalizer sums all ``k`` entries.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("p must be 1-d with at least 2 classes")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("p must be a probability vector")
    p_star = p if a is None else _acceptance_array(a, p.shape[0]) * p
    head = p_star[:-1]
    s = np.diag(head) - np.outer(head, head) / p_star.sum()
    return PointSMatrix(s=(s + s.T) / 2.0, at_x=at_x)


def dominance_margin(p, gamma: float) -> float:
    """Minimum eigenvalue of ``gamma * S_lus - S_full`` at one point.

    Non-negative (to rounding) for every probability vector and
    ``gamma >= 1``: the uncertainty-driven subsample never exceeds
    ``gamma`` times the full-data variance.
    """
    p = np.asarray(p, dtype=float)
    a = lus_acceptance(p, gamma).a
    s_sub = point_s_matrix(p, a).s
    s_full = point_s_matrix(p).s
    return float(np.linalg.eigvalsh(gamma * s_sub - s_full).min())


def closed_form_variance(data: Dataset, params: ModelParams, acceptance=None) -> VarianceEstimate:
    """Plug-in asymptotic covariance ``[avg_i grad_i S_i grad_i^T]^{-1}``.

    The population expectation is replaced by the empirical average over
    ``data`` and the class probabilities by the model's own predictions.
    ``acceptance`` is an optional ``(n, k)`` matrix aligned with the data;
    absent means the full-data estimator.
    """
    probs = batch_probs(params, data.features)
    if acceptance is not None:
        a = np.asarray(acceptance, dtype=float)
        if a.ndim == 1:
            a = np.broadcast_to(_acceptance_array(a, data.k), probs.shape)
        if a.shape != probs.shape:
            raise ValueError(f"acceptance must have shape {probs.shape}, got {a.shape}")
        if np.any(a <= 0) or np.any(a > 1):
            raise ValueError("acceptance probabilities must lie in (0, 1]")
        probs = a * probs
    head = probs[:, :-1]
    total = probs.sum(axis=1)
    design = _design(data.features)
    n, dp1 = design.shape
    km1 = data.k - 1
    info = np.empty((km1, dp1, km1, dp1))
    for j in range(km1):
        for l in range(j, km1):
            coeff = head[:, j] * (float(j == l) - head[:, l] / total)
            block = (design * coeff[:, None]).T @ design / n
            info[j, :, l, :] = block
            if l != j:
                info[l, :, j, :] = block.T
    info = info.reshape(km1 * dp1, km1 * dp1)
    info = (info + info.T) / 2.0
    try:
        factor = scipy.linalg.cho_factor(info, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix is not positive definite") from exc
    cov = scipy.linalg.cho_solve(factor, np.eye(info.shape[0]))
    return VarianceEstimate(matrix=(cov + cov.T) / 2.0, kind="closed_form")


def empirical_variance(theta_samples: np.ndarray, n_points: int) -> VarianceEstimate:
    """Replication covariance of ``sqrt(n) theta_hat`` from stacked fits.

    ``theta_samples`` is ``(reps, (k-1)(d+1))``; the result is on the same
    scale as :func:`closed_form_variance`.
    """
    samples = np.asarray(theta_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("need at least two replications")
    cov = np.cov(samples, rowvar=False, ddof=1) * n_points
    cov = np.atleast_2d(cov)
    return VarianceEstimate(matrix=(cov + cov.T) / 2.0, kind="empirical")


def expected_subsample_size(pilot_probs: np.ndarray, gamma: float) -> float:
    """Expected number of accepted points; never exceeds ``n / gamma``."""
    return float(expected_fractions(pilot_probs, gamma).sum())
