"""Multi-class logistic model with a fixed reference class.

The last class ``K`` is the reference: its logit is identically zero and
the model stores one coefficient row (intercept first, then feature
weights) for each of the other ``K-1`` classes. Labels are 1-based.
All likelihood quantities accept optional per-point additive logit
offsets and optional {0,1} inclusion weights; with zero offsets and unit
weights they reduce exactly to the plain full-data versions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "ModelParams",
    "logits",
    "predict_proba",
    "batch_logits",
    "batch_probs",
    "nll",
    "gradient",
    "hessian",
    "predict_labels",
    "accuracy",
]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``(n, d)`` plus integer labels in ``1..k``."""

    features: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        features = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must align 1:1 with feature rows")
        if features.size and not np.isfinite(features).all():
            raise ValueError("features contain non-finite values")
        if self.k < 2:
            raise ValueError("class count must be at least 2")
        if labels.size and (labels.min() < 1 or labels.max() > self.k):
            raise ValueError(f"labels must lie in 1..{self.k}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        """Number of points per class, shape ``(k,)``."""
        return np.bincount(self.labels, minlength=self.k + 1)[1:]

    def subset(self, index) -> "Dataset":
        """Dataset restricted to the given row indices or boolean mask."""
        return Dataset(self.features[index], self.labels[index], self.k)

    @classmethod
    def from_csv(cls, path, k: int | None = None) -> "Dataset":
        """Load from CSV with columns ``label,f1,...,fd``.

        A header row is detected and skipped. ``k`` defaults to the
        largest label present.
        """
        labels, rows = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row:
                    continue
                if row[0].strip().lower() == "label":
                    continue
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
        if not labels:
            raise ValueError(f"no data rows in {path}")
        features = np.asarray(rows, dtype=float)
        if features.size == 0:
            features = features.reshape(len(labels), 0)
        labels_arr = np.asarray(labels, dtype=np.int64)
        return cls(features, labels_arr, int(labels_arr.max()) if k is None else int(k))

    def to_csv(self, path) -> None:
        """Write CSV with header ``label,f1,...,fd`` (shortest float repr)."""
        with open(path, "w", newline="\n") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label"] + [f"f{j + 1}" for j in range(self.d)])
            for label, row in zip(self.labels, self.features):
                writer.writerow([int(label)] + [repr(float(v)) for v in row])


@dataclass(frozen=True)
class ModelParams:
    """Coefficient matrix ``(k-1, d+1)``; column 0 holds the intercepts.

    Row ``j`` parameterizes the log-odds of class ``j+1`` against the
    reference class ``k``.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.ascontiguousarray(np.asarray(self.coefficients, dtype=float))
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
            raise ValueError("coefficients must be a (k-1, d+1) matrix")
        if not np.isfinite(coeffs).all():
            raise ValueError("coefficients contain non-finite values")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def k(self) -> int:
        return self.coefficients.shape[0] + 1

    @property
    def d(self) -> int:
        return self.coefficients.shape[1] - 1

    @classmethod
    def zeros(cls, k: int, d: int) -> "ModelParams":
        return cls(np.zeros((k - 1, d + 1)))

    @classmethod
    def from_flat(cls, theta: np.ndarray, k: int, d: int) -> "ModelParams":
        return cls(np.asarray(theta, dtype=float).reshape(k - 1, d + 1))

    def flat(self) -> np.ndarray:
        """Stacked parameter vector of length ``(k-1)(d+1)``, class-major."""
        return self.coefficients.ravel().copy()

    def to_dict(self) -> dict:
        return {"k": self.k, "d": self.d, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelParams":
        params = cls(np.asarray(payload["coefficients"], dtype=float))
        if params.k != payload["k"] or params.d != payload["d"]:
            raise ValueError("coefficient shape disagrees with declared k/d")
        return params

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _design(features: np.ndarray) -> np.ndarray:
    """Prepend the implicit intercept column of ones."""
    n = features.shape[0]
    return np.hstack([np.ones((n, 1)), features])


def _check_offsets(offsets, n: int, k: int) -> np.ndarray | None:
    if offsets is None:
        return None
    offs = np.asarray(offsets, dtype=float)
    if offs.shape != (n, k - 1):
        raise ValueError(f"offsets must have shape ({n}, {k - 1}), got {offs.shape}")
    if offs.size and not np.isfinite(offs).all():
        raise ValueError("offsets contain non-finite values")
    return offs


def _check_weights(weights, n: int) -> np.ndarray | None:
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    if not np.all((w == 0.0) | (w == 1.0)):
        raise ValueError("weights must be 0/1 inclusion indicators")
    return w


def _stacked_logits(coefficients: np.ndarray, design: np.ndarray, offsets) -> np.ndarray:
    g = design @ coefficients.T
    if offsets is not None:
        g = g + offsets
    return g


def _log_norm(g: np.ndarray) -> np.ndarray:
    """Row-wise ``log(1 + sum_k exp(g_k))`` with max-logit stabilization."""
    m = np.maximum(g.max(axis=1), 0.0)
    return m + np.log(np.exp(-m) + np.exp(g - m[:, None]).sum(axis=1))


def _probs_from_logits(g: np.ndarray) -> np.ndarray:
    lse = _log_norm(g)
    probs = np.empty((g.shape[0], g.shape[1] + 1))
    probs[:, :-1] = np.exp(g - lse[:, None])
    probs[:, -1] = np.exp(-lse)
    return probs


def batch_logits(params: ModelParams, features: np.ndarray, offsets=None) -> np.ndarray:
    """Logits ``(n, k-1)`` for a feature matrix, reference class excluded."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != params.d:
        raise ValueError(f"features must have shape (n, {params.d})")
    offs = _check_offsets(offsets, features.shape[0], params.k)
    return _stacked_logits(params.coefficients, _design(features), offs)


def batch_probs(params: ModelParams, features: np.ndarray, offsets=None) -> np.ndarray:
    """Class probabilities ``(n, k)``; overflow-safe for logits up to ~700."""
    return _probs_from_logits(batch_logits(params, features, offsets))


def logits(params: ModelParams, x, offsets=None) -> np.ndarray:
    """Logit vector of length ``k-1`` at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"x must have length {params.d}, got shape {x.shape}")
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (params.k - 1,):
            raise ValueError(f"offsets must have length {params.k - 1}")
        offsets = offsets[None, :]
    return batch_logits(params, x[None, :], offsets)[0]


def predict_proba(params: ModelParams, x, offsets=None) -> np.ndarray:
    """Probability vector over the ``k`` classes at a single point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"x must have length {params.d}, got shape {x.shape}")
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (params.k - 1,):
            raise ValueError(f"offsets must have length {params.k - 1}")
        offsets = offsets[None, :]
    return batch_probs(params, x[None, :], offsets)[0]


def _label_indicators(labels: np.ndarray, k: int) -> np.ndarray:
    """One-hot rows over the first ``k-1`` classes (reference row is zero)."""
    n = labels.shape[0]
    y = np.zeros((n, k - 1))
    rows = np.nonzero(labels < k)[0]
    y[rows, labels[rows] - 1] = 1.0
    return y


def _nll_core(g: np.ndarray, labels: np.ndarray, k: int, weights) -> float:
    lse = _log_norm(g)
    g_obs = np.zeros(g.shape[0])
    rows = np.nonzero(labels < k)[0]
    g_obs[rows] = g[rows, labels[rows] - 1]
    per_point = lse - g_obs
    if weights is None:
        return float(per_point.sum() / g.shape[0])
    return float((weights * per_point).sum() / g.shape[0])


def nll(params: ModelParams, data: Dataset, offsets=None, weights=None) -> float:
    """Average negative log-likelihood ``(1/n) sum_i w_i [lse_i - g_obs,i]``.

    ``offsets`` (``(n, k-1)``) are added to the logits; ``weights`` must be
    0/1 inclusion indicators. Excluded points contribute zero but still
    count in the ``1/n`` normalization.
    """
    _require_same_k(params, data)
    offs = _check_offsets(offsets, data.n, data.k)
    w = _check_weights(weights, data.n)
    g = _stacked_logits(params.coefficients, _design(data.features), offs)
    return _nll_core(g, data.labels, data.k, w)


def gradient(params: ModelParams, data: Dataset, offsets=None, weights=None) -> np.ndarray:
    """Exact gradient of :func:`nll`, shape ``(k-1, d+1)``.

    Block ``j`` is ``-(1/n) sum_i w_i (1(c_i = j+1) - p_ij) (1, x_i)``.
    """
    _require_same_k(params, data)
    offs = _check_offsets(offsets, data.n, data.k)
    w = _check_weights(weights, data.n)
    design = _design(data.features)
    g = _stacked_logits(params.coefficients, design, offs)
    probs = _probs_from_logits(g)
    resid = _label_indicators(data.labels, data.k) - probs[:, :-1]
    if w is not None:
        resid = resid * w[:, None]
    return -(resid.T @ design) / data.n


def hessian(params: ModelParams, data: Dataset, offsets=None, weights=None) -> np.ndarray:
    """Hessian of :func:`nll`, shape ``((k-1)(d+1), (k-1)(d+1))``.

    Class block ``(j, l)`` carries the multinomial curvature
    ``p_j (1(j=l) - p_l)`` weighted by ``(1, x)(1, x)^T``; the result is
    symmetrized so ``H == H.T`` holds exactly.
    """
    _require_same_k(params, data)
    offs = _check_offsets(offsets, data.n, data.k)
    w = _check_weights(weights, data.n)
    design = _design(data.features)
    g = _stacked_logits(params.coefficients, design, offs)
    probs = _probs_from_logits(g)
    return _hessian_core(design, probs, w)


def _hessian_core(design: np.ndarray, probs: np.ndarray, weights) -> np.ndarray:
    n, dp1 = design.shape
    km1 = probs.shape[1] - 1
    h = np.empty((km1, dp1, km1, dp1))
    for j in range(km1):
        for l in range(j, km1):
            coeff = probs[:, j] * (float(j == l) - probs[:, l])
            if weights is not None:
                coeff = coeff * weights
            block = (design * coeff[:, None]).T @ design / n
            h[j, :, l, :] = block
            if l != j:
                h[l, :, j, :] = block.T
    h = h.reshape(km1 * dp1, km1 * dp1)
    return (h + h.T) / 2.0


def _require_same_k(params: ModelParams, data: Dataset) -> None:
    if params.k != data.k or params.d != data.d:
        raise ValueError(
            f"model is (k={params.k}, d={params.d}) but data is (k={data.k}, d={data.d})"
        )


def predict_labels(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Most probable class per row (lowest index wins ties), values ``1..k``."""
    return np.argmax(batch_probs(params, features), axis=1) + 1


def accuracy(params: ModelParams, data: Dataset) -> float:
    """Fraction of points whose most probable class matches the label."""
    return float(np.mean(predict_labels(params, data.features) == data.labels))
