"""Command-line interface: a linear pipeline split into subcommands.

Each stage (simulate, sample, fit, pipeline, variance, experiment) is
independently invokable for debugging. All randomness descends from one
``--seed`` through named sub-streams, so reruns produce byte-identical
artifacts.

Exit codes: 0 success, 2 usage or validation error, 3 degenerate fit,
4 experiment quality gate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import report as report_mod
from .asymptotics import SingularInformationError, closed_form_variance, expected_subsample_size
from .estimation import (
    DegenerateFitError,
    FitResult,
    SolverConfig,
    fit_mle,
    fit_subsample_mle,
    train_pilot,
)
from .model import Dataset, ModelParams, batch_probs
from .rng import stream_key
from .sampling import (
    Subsample,
    acceptance_plan_dict,
    case_control_plan,
    draw_subsample,
    lus_acceptance_probs,
    uniform_acceptance,
)
from .simulate import SPEC_NAMES, ExperimentQualityError, named_spec, generate, run_replications

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_QUALITY = 4


def _solver_from_args(args) -> SolverConfig:
    return SolverConfig(
        tol=args.tol,
        max_iters=args.max_iters,
    )


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=1e-8, help="gradient sup-norm tolerance")
    parser.add_argument("--max-iters", type=int, default=100, help="Newton iteration cap")


def cmd_simulate(args) -> int:
    spec = named_spec(args.spec)
    data = generate(spec, args.n, args.seed)
    data.to_csv(args.out)
    counts = data.class_counts()
    print(f"n={data.n} k={data.k} d={data.d}")
    print("class_counts=" + ",".join(str(int(c)) for c in counts))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _solver_from_args(args)
    data = Dataset.from_csv(args.input)
    if args.subsample:
        sub = Subsample.from_csv(args.subsample, n_original=data.n)
        if sub.k != data.k or (sub.size and sub.features.shape[1] != data.d):
            print("error: subsample dimensions disagree with the input data", file=sys.stderr)
            return EXIT_USAGE
        result = fit_subsample_mle(sub, config)
    else:
        result = fit_mle(data, config)
    payload = json.dumps(result.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
        print(f"wrote {args.out}")
    else:
        print(payload)
    if not result.converged:
        print(
            f"warning: not converged after {result.iterations} iterations "
            f"(grad norm {result.final_grad_norm:.3e})",
            file=sys.stderr,
        )
    return EXIT_OK


def _build_acceptance(args, data: Dataset, seed: int):
    """Per-point acceptance matrix plus the plan audit record."""
    if args.scheme == "lus":
        if args.pilot_model:
            pilot = ModelParams.from_json(args.pilot_model)
        else:
            pilot = train_pilot(data, args.pilot_fraction, stream_key(seed, "pilot-stage"))
        probs = batch_probs(pilot, data.features)
        acceptance = lus_acceptance_probs(probs, args.gamma)
        plan = acceptance_plan_dict("lus", args.gamma)
        return acceptance, plan, pilot
    if args.scheme == "uniform":
        vec = uniform_acceptance(args.gamma, data.k).a
        return np.broadcast_to(vec, (data.n, data.k)), acceptance_plan_dict(
            "uniform", args.gamma, vec
        ), None
    budget = args.budget if args.budget else int(round(data.n / args.gamma))
    per_class = case_control_plan(data, budget)
    return (
        np.broadcast_to(per_class, (data.n, data.k)),
        acceptance_plan_dict("cc", args.gamma, per_class),
        None,
    )


def cmd_sample(args) -> int:
    data = Dataset.from_csv(args.input)
    acceptance, plan, _ = _build_acceptance(args, data, args.seed)
    sub = draw_subsample(data, acceptance, stream_key(args.seed, "sampling"), args.gamma)
    sub.to_csv(args.out)
    if args.plan:
        Path(args.plan).write_text(json.dumps(plan, indent=2) + "\n")
    print(f"kept {sub.size} of {data.n} points (fraction {sub.fraction:.4f})")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _solver_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = Dataset.from_csv(args.input)
    acceptance, plan, pilot = _build_acceptance(args, data, args.seed)
    sub = draw_subsample(data, acceptance, stream_key(args.seed, "sampling"), args.gamma)
    result = fit_subsample_mle(sub, config)
    if not result.converged:
        raise DegenerateFitError(
            f"subsample fit did not converge (grad norm {result.final_grad_norm:.3e})"
        )
    result.to_json(out_dir / "model.json")
    sub.to_csv(out_dir / "subsample.csv")
    if pilot is not None:
        pilot.to_json(out_dir / "pilot.json")
    metrics = {
        "scheme": args.scheme,
        "gamma": args.gamma,
        "seed": args.seed,
        "n": data.n,
        "subsample_size": sub.size,
        "subsample_fraction": sub.fraction,
        "solver": {
            "converged": result.converged,
            "iterations": result.iterations,
            "final_grad_norm": result.final_grad_norm,
            "objective": result.objective,
        },
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    print(f"kept {sub.size} of {data.n} points (fraction {sub.fraction:.4f})")
    print(f"wrote {out_dir / 'model.json'}, {out_dir / 'subsample.csv'}, {out_dir / 'metrics.json'}")
    return EXIT_OK


def cmd_variance(args) -> int:
    data = Dataset.from_csv(args.input)
    params = ModelParams.from_json(args.model)
    acceptance = None
    if args.scheme:
        if args.gamma is None:
            print("error: --gamma is required with --scheme", file=sys.stderr)
            return EXIT_USAGE
        if args.scheme == "lus":
            pilot = ModelParams.from_json(args.pilot_model) if args.pilot_model else params
            acceptance = lus_acceptance_probs(batch_probs(pilot, data.features), args.gamma)
        elif args.scheme == "uniform":
            acceptance = np.broadcast_to(
                uniform_acceptance(args.gamma, data.k).a, (data.n, data.k)
            )
        else:
            budget = args.budget if args.budget else int(round(data.n / args.gamma))
            acceptance = np.broadcast_to(case_control_plan(data, budget), (data.n, data.k))
    estimate = closed_form_variance(data, params, acceptance)
    payload = json.dumps(estimate.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
        print(f"wrote {args.out}")
    else:
        print(payload)
    return EXIT_OK


_EXPERIMENT_DEFAULTS = {
    "spec": "marginal-imbalance",
    "n": 50_000,
    "n_test": 100_000,
    "gammas": [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    "reps": 200,
    "pilot_fraction": 0.1,
    "seed": 0,
}


def _experiment_config(args) -> dict:
    config = dict(_EXPERIMENT_DEFAULTS)
    if args.config:
        try:
            config.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {args.config} is not valid JSON: {exc}") from exc
    overrides = {
        "spec": args.spec,
        "n": args.n,
        "n_test": args.n_test,
        "reps": args.reps,
        "pilot_fraction": args.pilot_fraction,
        "seed": args.seed,
    }
    config.update({key: val for key, val in overrides.items() if val is not None})
    if args.gammas:
        config["gammas"] = [float(tok) for tok in args.gammas.split(",") if tok.strip()]
    return config


def _validate_experiment_config(config: dict) -> str | None:
    if config["spec"] not in SPEC_NAMES:
        return f"unknown spec {config['spec']!r} (choose from {sorted(SPEC_NAMES)})"
    if int(config["reps"]) < 2:
        return "reps must be at least 2"
    if int(config["n"]) < 1 or int(config["n_test"]) < 1:
        return "n and n_test must be at least 1"
    if not 0 < float(config["pilot_fraction"]) <= 1:
        return "pilot_fraction must lie in (0, 1]"
    if not config["gammas"] or any(float(g) < 1 for g in config["gammas"]):
        return "every gamma must be >= 1"
    return None


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    problem = _validate_experiment_config(config)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    solver = SolverConfig()
    if "solver" in config:
        solver = SolverConfig(**config["solver"])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = run_replications(
        spec=named_spec(config["spec"]),
        n=int(config["n"]),
        n_test=int(config["n_test"]),
        gammas=[float(g) for g in config["gammas"]],
        reps=int(config["reps"]),
        pilot_fraction=float(config["pilot_fraction"]),
        seed=int(config["seed"]),
        n_jobs=args.jobs,
        config=solver,
    )
    report_mod.write_summary_csv(reports, out_dir / "summary.csv")
    report_mod.write_tau_csv(reports, out_dir / "tau.csv")
    written = [out_dir / "summary.csv", out_dir / "tau.csv"]
    if not args.no_plots:
        written += report_mod.render_figures(reports, out_dir)
    print(report_mod.format_summary_table(reports))
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lus",
        description="Subsampled multi-class logistic regression via local uncertainty sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic mixture dataset CSV")
    p.add_argument("--spec", choices=sorted(SPEC_NAMES), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the MLE on a dataset or an offset subsample")
    p.add_argument("--input", required=True, help="dataset CSV (label,f1,...,fd)")
    p.add_argument("--subsample", help="subsample CSV; fits the offset-corrected MLE")
    p.add_argument("--out", help="write the fit JSON here instead of stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw an offset-carrying subsample")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=["lus", "uniform", "cc"], required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--budget", type=int, help="case-control budget (default n/gamma)")
    p.add_argument("--pilot-model", help="pilot model JSON for the lus scheme")
    p.add_argument("--pilot-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--plan", help="also write the acceptance plan JSON here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pipeline", help="pilot, sample, and fit in one pass")
    p.add_argument("--input", required=True)
    p.add_argument("--scheme", choices=["lus", "uniform", "cc"], default="lus")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--pilot-model", help="pilot model JSON (skips pilot training)")
    p.add_argument("--pilot-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("variance", help="closed-form asymptotic variance of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", dest="input", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--scheme", choices=["lus", "uniform", "cc"])
    p.add_argument("--budget", type=int)
    p.add_argument("--pilot-model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("experiment", help="replicated scheme comparison with CSV + figures")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--spec", choices=sorted(SPEC_NAMES))
    p.add_argument("--n", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--gammas", help="comma-separated gamma list")
    p.add_argument("--pilot-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-dir", default="experiment-out")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_experiment)

    return parser


def _positive_gamma(args) -> str | None:
    gamma = getattr(args, "gamma", None)
    if gamma is not None and gamma < 1:
        return f"gamma must be >= 1, got {gamma:g}"
    fraction = getattr(args, "pilot_fraction", None)
    if fraction is not None and not 0 < fraction <= 1:
        return f"pilot-fraction must lie in (0, 1], got {fraction:g}"
    n = getattr(args, "n", None)
    if n is not None and n < 1:
        return f"n must be at least 1, got {n}"
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    problem = _positive_gamma(args)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DegenerateFitError as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SingularInformationError as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ExperimentQualityError as exc:
        print(f"experiment quality gate: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
