"""Acceptance-probability schemes and the seeded Bernoulli subsampler.

Three schemes assign per-point, per-class acceptance probabilities
``a(x, c)``: local uncertainty sampling (driven by pilot class
probabilities), uniform sampling, and quota-based case-control sampling.
``draw_subsample`` turns any of them into an offset-carrying subsample
with one Bernoulli coin per point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .model import Dataset
from .rng import point_uniforms

__all__ = [
    "A_FLOOR",
    "Q_CLAMP",
    "AcceptanceVector",
    "Subsample",
    "lus_acceptance",
    "lus_acceptance_probs",
    "uniform_acceptance",
    "case_control_plan",
    "draw_subsample",
    "expected_fraction",
    "expected_fractions",
    "acceptance_plan_dict",
]

# Floor on every acceptance probability so log(a_k / a_K) stays finite for
# all classes, observed or not.
A_FLOOR = 1e-12

# The pilot confidence q is capped at 1 - Q_CLAMP: at q = 1, gamma = 1 the
# confident-class formula degenerates to 0/0.
Q_CLAMP = 1e-6


def _check_prob_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("probability vector must be 1-d with at least 2 classes")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("probabilities must lie in [0, 1] and sum to 1")
    return p


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    return gamma


@dataclass(frozen=True)
class AcceptanceVector:
    """Acceptance probabilities ``a`` over the ``k`` classes at one point."""

    a: np.ndarray
    q_tilde: float = 0.5

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.shape[0] < 2:
            raise ValueError("acceptance vector must be 1-d with at least 2 classes")
        if np.any(a <= 0) or np.any(a > 1):
            raise ValueError("acceptance probabilities must lie in (0, 1]")
        if not 0.5 <= self.q_tilde <= 1.0 - Q_CLAMP:
            raise ValueError("q_tilde must lie in [0.5, 1 - Q_CLAMP]")
        object.__setattr__(self, "a", a)

    @property
    def k(self) -> int:
        return self.a.shape[0]

    def offsets(self) -> np.ndarray:
        """Logit offsets ``log(a_k / a_K)`` for classes ``1..k-1``."""
        return np.log(self.a[:-1]) - np.log(self.a[-1])


@dataclass(frozen=True)
class Subsample:
    """Accepted points with the offsets the corrected fit needs.

    ``offsets[i, j] = log(a(x_i, j+1) / a(x_i, K))`` for each accepted
    point; ``indices`` refer to rows of the original dataset and are
    strictly increasing.
    """

    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    n_original: int
    gamma: float | None = field(default=None)

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        offsets = np.asarray(self.offsets, dtype=float)
        m = indices.shape[0]
        if features.shape[0] != m or labels.shape[0] != m or offsets.shape[0] != m:
            raise ValueError("subsample arrays must share their leading dimension")
        if offsets.ndim != 2 or offsets.shape[1] < 1:
            raise ValueError("offsets must be (m, k-1)")
        if offsets.size and not np.isfinite(offsets).all():
            raise ValueError("offsets contain non-finite values")
        if m and np.any(np.diff(indices) <= 0):
            raise ValueError("indices must be distinct and increasing")
        if not 0 <= m <= self.n_original:
            raise ValueError("subsample cannot exceed the original dataset")
        for name, arr in (("indices", indices), ("features", features),
                          ("labels", labels), ("offsets", offsets)):
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.offsets.shape[1] + 1

    @property
    def fraction(self) -> float:
        return self.size / self.n_original

    def to_dataset(self) -> Dataset:
        """Accepted points as a plain dataset (offsets dropped)."""
        return Dataset(self.features, self.labels, self.k)

    def to_csv(self, path) -> None:
        """Write CSV with header ``index,label,o_1,...,o_{k-1},f1,...,fd``."""
        km1 = self.offsets.shape[1]
        d = self.features.shape[1]
        with open(path, "w", newline="\n") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["index", "label"]
                + [f"o_{j + 1}" for j in range(km1)]
                + [f"f{j + 1}" for j in range(d)]
            )
            for i in range(self.size):
                writer.writerow(
                    [int(self.indices[i]), int(self.labels[i])]
                    + [repr(float(v)) for v in self.offsets[i]]
                    + [repr(float(v)) for v in self.features[i]]
                )

    @classmethod
    def from_csv(cls, path, n_original: int | None = None, gamma: float | None = None) -> "Subsample":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            km1 = sum(1 for name in header if name.startswith("o_"))
            if km1 < 1:
                raise ValueError("subsample CSV must carry at least one offset column")
            rows = [row for row in reader if row]
        indices = np.asarray([int(r[0]) for r in rows], dtype=np.int64)
        labels = np.asarray([int(r[1]) for r in rows], dtype=np.int64)
        offsets = np.asarray([[float(v) for v in r[2:2 + km1]] for r in rows], dtype=float)
        features = np.asarray([[float(v) for v in r[2 + km1:]] for r in rows], dtype=float)
        if features.size == 0:
            features = features.reshape(len(rows), 0)
        n_orig = n_original if n_original is not None else (int(indices.max()) + 1 if rows else 0)
        return cls(indices, features, labels, offsets, n_orig, gamma)


def lus_acceptance_probs(pilot_probs: np.ndarray, gamma: float) -> np.ndarray:
    """Acceptance matrix ``(n, k)`` from pilot probabilities ``(n, k)``.

    Per point, with ``q = clip(max(0.5, max_k p_k), 0.5, 1 - Q_CLAMP)``:
    the most probable class, when its probability reaches 0.5, gets
    ``(1 - q) / (gamma - max(q, gamma/2))``; every other class gets
    ``min(1, 2 q / gamma)``. Entries are floored at ``A_FLOOR``.
    """
    gamma = _check_gamma(gamma)
    probs = np.asarray(pilot_probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise ValueError("pilot_probs must be (n, k) with k >= 2")
    q_raw = probs.max(axis=1)
    top = probs.argmax(axis=1)  # lowest index on ties, for determinism
    q = np.clip(np.maximum(q_raw, 0.5), 0.5, 1.0 - Q_CLAMP)
    a = np.repeat(np.minimum(1.0, 2.0 * q / gamma)[:, None], probs.shape[1], axis=1)
    confident = np.nonzero(q_raw >= 0.5)[0]
    a_top = (1.0 - q) / (gamma - np.maximum(q, 0.5 * gamma))
    a[confident, top[confident]] = a_top[confident]
    return np.maximum(a, A_FLOOR)


def lus_acceptance(p_tilde, gamma: float) -> AcceptanceVector:
    """Acceptance probabilities at one point from its pilot distribution."""
    p = _check_prob_vector(p_tilde)
    a = lus_acceptance_probs(p[None, :], gamma)[0]
    q = float(np.clip(max(0.5, p.max()), 0.5, 1.0 - Q_CLAMP))
    return AcceptanceVector(a=a, q_tilde=q)


def uniform_acceptance(gamma: float, k: int) -> AcceptanceVector:
    """Constant acceptance ``1/gamma`` for every class (zero offsets)."""
    gamma = _check_gamma(gamma)
    if k < 2:
        raise ValueError("class count must be at least 2")
    return AcceptanceVector(a=np.full(k, 1.0 / gamma), q_tilde=0.5)


def case_control_plan(data: Dataset, budget: int) -> np.ndarray:
    """Per-class acceptance probabilities targeting ``budget/k`` per class.

    Classes too small to fill their quota are kept whole and their unused
    quota is redistributed equally among the remaining classes until the
    allocation is stable.
    """
    budget = int(budget)
    if not 0 < budget <= data.n:
        raise ValueError(f"budget must lie in 1..{data.n}, got {budget}")
    counts = data.class_counts()
    a = np.ones(data.k)
    active = [c for c in range(data.k) if counts[c] > 0]
    remaining = float(budget)
    while active:
        quota = remaining / len(active)
        capped = [c for c in active if counts[c] <= quota]
        if not capped:
            for c in active:
                a[c] = quota / counts[c]
            break
        for c in capped:
            a[c] = 1.0
            remaining -= counts[c]
            active.remove(c)
    return a


def draw_subsample(data: Dataset, acceptance, seed: int, gamma: float | None = None) -> Subsample:
    """One-pass Bernoulli subsample: keep point ``i`` w.p. ``a(x_i, c_i)``.

    ``acceptance`` is an ``(n, k)`` matrix of per-point acceptance
    vectors, or a length-``k`` vector applied to every point. The coin
    for point ``i`` is a pure function of ``(seed, i)``, so equal seeds
    give bit-identical subsamples regardless of chunking.
    """
    a = np.asarray(acceptance, dtype=float)
    if a.ndim == 1:
        if a.shape[0] != data.k:
            raise ValueError(f"acceptance vector must have length {data.k}")
        a = np.broadcast_to(a, (data.n, data.k))
    if a.shape != (data.n, data.k):
        raise ValueError(f"acceptance must have shape ({data.n}, {data.k}), got {a.shape}")
    if np.any(a < 0) or np.any(a > 1):
        raise ValueError("acceptance probabilities must lie in [0, 1]")
    u = point_uniforms(seed, 0, data.n)
    observed = a[np.arange(data.n), data.labels - 1]
    kept = np.nonzero(u < observed)[0]
    with np.errstate(divide="ignore"):
        offsets = np.log(a[kept, : data.k - 1]) - np.log(a[kept, data.k - 1:data.k])
    return Subsample(
        indices=kept,
        features=data.features[kept],
        labels=data.labels[kept],
        offsets=offsets,
        n_original=data.n,
        gamma=gamma,
    )


def expected_fractions(pilot_probs: np.ndarray, gamma: float) -> np.ndarray:
    """Per-point expected acceptance under the pilot distribution.

    Closed form in ``q``: ``4 q (1 - q) / gamma`` when ``gamma >= 2q``,
    else ``gamma (1 - q) / (gamma - q)``; always at most ``1/gamma``.
    """
    gamma = _check_gamma(gamma)
    probs = np.asarray(pilot_probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise ValueError("pilot_probs must be (n, k) with k >= 2")
    q = np.clip(np.maximum(probs.max(axis=1), 0.5), 0.5, 1.0 - Q_CLAMP)
    return np.where(
        gamma >= 2.0 * q,
        4.0 * q * (1.0 - q) / gamma,
        gamma * (1.0 - q) / (gamma - q),
    )


def expected_fraction(p_tilde, gamma: float) -> float:
    """Expected acceptance probability at one point (see :func:`expected_fractions`)."""
    p = _check_prob_vector(p_tilde)
    return float(expected_fractions(p[None, :], gamma)[0])


def acceptance_plan_dict(scheme: str, gamma: float | None, per_class=None) -> dict:
    """Audit record for an acceptance plan, JSON-serializable."""
    if scheme not in ("lus", "uniform", "cc"):
        raise ValueError(f"unknown scheme {scheme!r}")
    return {
        "gamma": None if gamma is None else float(gamma),
        "scheme": scheme,
        "per_class": None if per_class is None else [float(v) for v in per_class],
    }
