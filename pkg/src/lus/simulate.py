"""Synthetic Gaussian-mixture benchmarks and the replication harness.

Two built-in three-class populations share the same class means
(identity covariance) and differ only in their priors: one is dominated
by the middle class, the other is balanced. Both have linear true
log-odds, so the fitted family is correctly specified and the exact
population parameters are available for consistency checks.

``run_replications`` reproduces the variance-ratio protocol: one frozen
pilot, then per replication a fresh dataset, a full-data fit, and
budget-matched uncertainty/uniform/case-control fits, reduced into
per-coordinate variance ratios (tau), realized subsample fractions, and
test accuracies.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import expected_subsample_size
from .estimation import DegenerateFitError, SolverConfig, fit_mle, fit_subsample_mle
from .model import Dataset, ModelParams, accuracy, batch_probs
from .rng import stream_key, substream
from .sampling import case_control_plan, draw_subsample, lus_acceptance_probs

__all__ = [
    "GaussianMixtureSpec",
    "ReplicationReport",
    "ExperimentQualityError",
    "SPEC_NAMES",
    "named_spec",
    "marginal_imbalance_spec",
    "marginal_balance_spec",
    "true_params",
    "generate",
    "run_replications",
]

SCHEMES = ("full", "lus", "us", "cc")

# A gamma's statistics are unusable when more than this share of its
# replications ends in a degenerate fit.
MAX_DEGENERATE_SHARE = 0.05


class ExperimentQualityError(RuntimeError):
    """Too many replications ended in degenerate fits."""


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Class-conditional Gaussians ``N(mean_k, I)`` with class priors."""

    means: np.ndarray
    priors: np.ndarray
    identity_covariance: bool = True

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        priors = np.asarray(self.priors, dtype=float)
        if means.ndim != 2 or means.shape[0] < 2:
            raise ValueError("means must be (k, d) with k >= 2")
        if priors.shape != (means.shape[0],):
            raise ValueError("priors must align with means")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError("priors must be a strictly positive simplex point")
        if not np.isfinite(means).all():
            raise ValueError("means contain non-finite values")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "priors", priors)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


def marginal_imbalance_spec() -> GaussianMixtureSpec:
    """Three classes in 20 dimensions, the middle class holding 80% mass."""
    d = 20
    means = np.zeros((3, d))
    means[0, :10] = 1.0
    means[1, 10:] = 1.0
    return GaussianMixtureSpec(means=means, priors=np.array([0.1, 0.8, 0.1]))


def marginal_balance_spec() -> GaussianMixtureSpec:
    """Same means as the imbalanced population, equal priors."""
    base = marginal_imbalance_spec()
    return GaussianMixtureSpec(means=base.means, priors=np.full(3, 1.0 / 3.0))


SPEC_NAMES = {
    "marginal-imbalance": marginal_imbalance_spec,
    "marginal-balance": marginal_balance_spec,
}


def named_spec(name: str) -> GaussianMixtureSpec:
    try:
        return SPEC_NAMES[name]()
    except KeyError:
        raise ValueError(f"unknown spec name {name!r}") from None


def true_params(spec: GaussianMixtureSpec) -> ModelParams:
    """Exact population log-odds parameters of the mixture.

    For shared identity covariance the posterior log-odds of class ``j``
    against the last class are linear: weights ``mu_j - mu_K`` and
    intercept ``-(|mu_j|^2 - |mu_K|^2)/2 + log(pi_j / pi_K)``.
    """
    if not spec.identity_covariance:
        raise ValueError("only identity covariance is supported")
    ref = spec.means[-1]
    weights = spec.means[:-1] - ref
    sq = (spec.means**2).sum(axis=1)
    intercepts = -0.5 * (sq[:-1] - sq[-1]) + np.log(spec.priors[:-1] / spec.priors[-1])
    return ModelParams(np.column_stack([intercepts, weights]))


def generate(spec: GaussianMixtureSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` labeled points: label from the priors, features from
    the matching Gaussian. Equal seeds give identical datasets."""
    if n < 1:
        raise ValueError("n must be at least 1")
    gen = substream(seed, "mixture")
    labels = gen.choice(spec.k, size=n, p=spec.priors) + 1
    features = gen.standard_normal((n, spec.d)) + spec.means[labels - 1]
    return Dataset(features, labels, spec.k)


@dataclass(frozen=True)
class ReplicationReport:
    """Variance ratios and accuracies for one gamma across replications.

    ``tau*`` vectors hold the per-coordinate ratio of the replication
    variance of each subsampled estimator to the full-data one;
    ``subsample_fraction`` is the mean realized uncertainty-sampling
    fraction, and ``accuracy`` maps scheme name to mean test accuracy.
    """

    gamma: float
    reps: int
    tau: np.ndarray
    tau_us: np.ndarray
    tau_cc: np.ndarray
    subsample_fraction: float
    accuracy: dict = field(default_factory=dict)
    degenerate_reps: int = 0

    def __post_init__(self):
        for name in ("tau", "tau_us", "tau_cc"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr <= 0) or not np.isfinite(arr).all():
                raise ValueError(f"{name} entries must be positive and finite")
            object.__setattr__(self, name, arr)
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must lie in (0, 1]")

    @property
    def mean_tau(self) -> float:
        return float(self.tau.mean())

    @property
    def mean_tau_us(self) -> float:
        return float(self.tau_us.mean())

    @property
    def mean_tau_cc(self) -> float:
        return float(self.tau_cc.mean())


def _fit_or_none(fit_fn, *args, config) -> np.ndarray | None:
    """Flattened parameters, or None when the fit is degenerate."""
    try:
        result = fit_fn(*args, config)
    except DegenerateFitError:
        return None
    return result.params.flat() if result.converged else None


def _replication(
    spec: GaussianMixtureSpec,
    n: int,
    gammas: tuple,
    pilot: ModelParams,
    config: SolverConfig,
    seed: int,
    rep: int,
) -> dict:
    """One replication: fresh data, full fit, budget-matched scheme fits."""
    data = generate(spec, n, stream_key(seed, "rep-data", rep))
    out = {"full": _fit_or_none(fit_mle, data, config=config), "per_gamma": []}
    probs = batch_probs(pilot, data.features)
    for gi, gamma in enumerate(gammas):
        acceptance = lus_acceptance_probs(probs, gamma)
        sub = draw_subsample(data, acceptance, stream_key(seed, "lus", gi, rep), gamma)
        budget = expected_subsample_size(probs, gamma)
        budget_n = int(np.clip(round(budget), 1, n))
        us_sub = draw_subsample(
            data, np.full(data.k, budget_n / n), stream_key(seed, "us", gi, rep), gamma
        )
        cc_sub = draw_subsample(
            data, case_control_plan(data, budget_n), stream_key(seed, "cc", gi, rep), gamma
        )
        out["per_gamma"].append(
            {
                "lus": _fit_or_none(fit_subsample_mle, sub, config=config),
                "us": _fit_or_none(fit_subsample_mle, us_sub, config=config),
                "cc": _fit_or_none(fit_subsample_mle, cc_sub, config=config),
                "fraction": sub.fraction,
            }
        )
    return out


def _replication_star(args) -> dict:
    return _replication(*args)


def _train_frozen_pilot(
    spec: GaussianMixtureSpec, n: int, pilot_fraction: float, seed: int, config: SolverConfig
) -> ModelParams:
    pilot_n = max(1, round(pilot_fraction * n))
    try:
        return fit_mle(generate(spec, pilot_n, stream_key(seed, "pilot-data")), config).params
    except DegenerateFitError:
        retry = generate(spec, 2 * pilot_n, stream_key(seed, "pilot-data-retry"))
        return fit_mle(retry, config).params


def run_replications(
    spec: GaussianMixtureSpec,
    n: int,
    n_test: int,
    gammas,
    reps: int,
    pilot_fraction: float,
    seed: int,
    n_jobs: int = 1,
    config: SolverConfig | None = None,
) -> list[ReplicationReport]:
    """Replicated comparison of the sampling schemes at each gamma.

    One pilot is trained on a fresh ``pilot_fraction * n`` sample and
    frozen. Each replication then draws a fresh dataset, fits the
    full-data MLE, and fits the three subsampled estimators; uniform and
    case-control budgets match the expected (not realized) uncertainty-
    sampling size, keeping the schemes independent. Replications whose
    fits are degenerate are dropped per gamma; more than
    ``MAX_DEGENERATE_SHARE`` of them raises
    :class:`ExperimentQualityError`.

    Results are bit-identical for a given seed regardless of ``n_jobs``.
    """
    config = config or SolverConfig()
    gammas = tuple(float(g) for g in gammas)
    if not gammas:
        raise ValueError("need at least one gamma")
    if any(g < 1 for g in gammas):
        raise ValueError("every gamma must be >= 1")
    if reps < 2:
        raise ValueError("need at least two replications")
    if not 0 < pilot_fraction <= 1:
        raise ValueError("pilot_fraction must lie in (0, 1]")
    if n < 1 or n_test < 1:
        raise ValueError("n and n_test must be at least 1")

    pilot = _train_frozen_pilot(spec, n, pilot_fraction, seed, config)
    test_data = generate(spec, n_test, stream_key(seed, "test-data"))

    jobs = [(spec, n, gammas, pilot, config, seed, rep) for rep in range(reps)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_replication_star, jobs, chunksize=max(1, reps // (4 * n_jobs))))
    else:
        results = [_replication_star(job) for job in jobs]

    full_acc = {
        rep: accuracy(ModelParams.from_flat(res["full"], spec.k, spec.d), test_data)
        for rep, res in enumerate(results)
        if res["full"] is not None
    }

    reports = []
    for gi, gamma in enumerate(gammas):
        valid = [
            rep
            for rep, res in enumerate(results)
            if res["full"] is not None
            and all(res["per_gamma"][gi][s] is not None for s in ("lus", "us", "cc"))
        ]
        degenerate = reps - len(valid)
        if degenerate > MAX_DEGENERATE_SHARE * reps:
            raise ExperimentQualityError(
                f"gamma={gamma:g}: {degenerate}/{reps} degenerate replications"
            )
        theta_full = np.stack([results[rep]["full"] for rep in valid])
        var_full = theta_full.var(axis=0, ddof=1)
        taus = {}
        acc = {"full": float(np.mean([full_acc[rep] for rep in valid]))}
        for scheme in ("lus", "us", "cc"):
            theta = np.stack([results[rep]["per_gamma"][gi][scheme] for rep in valid])
            taus[scheme] = theta.var(axis=0, ddof=1) / var_full
            acc[scheme] = float(
                np.mean(
                    [
                        accuracy(ModelParams.from_flat(t, spec.k, spec.d), test_data)
                        for t in theta
                    ]
                )
            )
        fraction = float(np.mean([results[rep]["per_gamma"][gi]["fraction"] for rep in valid]))
        reports.append(
            ReplicationReport(
                gamma=gamma,
                reps=reps,
                tau=taus["lus"],
                tau_us=taus["us"],
                tau_cc=taus["cc"],
                subsample_fraction=fraction,
                accuracy=acc,
                degenerate_reps=degenerate,
            )
        )
    return reports
