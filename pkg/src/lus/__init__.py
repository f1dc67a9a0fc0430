"""Subsampled multi-class logistic regression via local uncertainty sampling.

A pilot estimator assigns each point a per-class acceptance probability;
the accepted points carry known logit offsets that make the plain MLE on
the subsample consistent for the original population. The package
provides the model and solver, the acceptance schemes and subsampler,
closed-form asymptotic variances, and a replicated-simulation harness
with CSV and figure reports.
"""

from .asymptotics import (
    PointSMatrix,
    SingularInformationError,
    VarianceEstimate,
    closed_form_variance,
    dominance_margin,
    empirical_variance,
    expected_subsample_size,
    point_s_matrix,
)
from .estimation import (
    DegenerateFitError,
    FitResult,
    SolverConfig,
    fit_mle,
    fit_subsample_mle,
    pilot_probs,
    train_pilot,
)
from .model import (
    Dataset,
    ModelParams,
    accuracy,
    batch_logits,
    batch_probs,
    gradient,
    hessian,
    logits,
    nll,
    predict_labels,
    predict_proba,
)
from .sampling import (
    A_FLOOR,
    Q_CLAMP,
    AcceptanceVector,
    Subsample,
    acceptance_plan_dict,
    case_control_plan,
    draw_subsample,
    expected_fraction,
    expected_fractions,
    lus_acceptance,
    lus_acceptance_probs,
    uniform_acceptance,
)
from .simulate import (
    ExperimentQualityError,
    GaussianMixtureSpec,
    ReplicationReport,
    generate,
    marginal_balance_spec,
    marginal_imbalance_spec,
    named_spec,
    run_replications,
    true_params,
)

__version__ = "0.1.0"

__all__ = [
    "A_FLOOR",
    "Q_CLAMP",
    "AcceptanceVector",
    "Dataset",
    "DegenerateFitError",
    "ExperimentQualityError",
    "FitResult",
    "GaussianMixtureSpec",
    "ModelParams",
    "PointSMatrix",
    "ReplicationReport",
    "SingularInformationError",
    "SolverConfig",
    "Subsample",
    "VarianceEstimate",
    "acceptance_plan_dict",
    "accuracy",
    "batch_logits",
    "batch_probs",
    "case_control_plan",
    "closed_form_variance",
    "dominance_margin",
    "draw_subsample",
    "empirical_variance",
    "expected_fraction",
    "expected_fractions",
    "expected_subsample_size",
    "fit_mle",
    "fit_subsample_mle",
    "generate",
    "gradient",
    "hessian",
    "logits",
    "lus_acceptance",
    "lus_acceptance_probs",
    "marginal_balance_spec",
    "marginal_imbalance_spec",
    "named_spec",
    "nll",
    "pilot_probs",
    "point_s_matrix",
    "predict_labels",
    "predict_proba",
    "run_replications",
    "train_pilot",
    "true_params",
    "uniform_acceptance",
    "__version__",
]
