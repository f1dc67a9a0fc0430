"""Delimited output and figure rendering for replication studies.

CSV is the contract: one long-format file with the per-coordinate
variance ratios and one summary row per gamma. The figures rendered
alongside are conveniences for eyeballing the same numbers (variance
ratio against its target, subsample cost, accuracy against cost).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulate import ReplicationReport

__all__ = [
    "write_tau_csv",
    "write_summary_csv",
    "render_figures",
    "format_summary_table",
]

SUMMARY_HEADER = ["gamma", "mean_tau", "nsub_frac", "acc_full", "acc_lus", "acc_us", "acc_cc"]
TAU_HEADER = ["gamma", "coordinate", "tau_lus", "tau_us", "tau_cc"]

_SCHEME_STYLE = {
    "lus": {"color": "tab:blue", "marker": "o", "label": "LUS"},
    "us": {"color": "tab:orange", "marker": "s", "label": "US"},
    "cc": {"color": "tab:green", "marker": "^", "label": "CC"},
}


def write_summary_csv(reports: list[ReplicationReport], path) -> None:
    """One row per gamma: mean tau, realized fraction, accuracies."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for rep in reports:
            writer.writerow(
                [
                    repr(float(rep.gamma)),
                    repr(rep.mean_tau),
                    repr(rep.subsample_fraction),
                    repr(rep.accuracy["full"]),
                    repr(rep.accuracy["lus"]),
                    repr(rep.accuracy["us"]),
                    repr(rep.accuracy["cc"]),
                ]
            )


def write_tau_csv(reports: list[ReplicationReport], path) -> None:
    """Long format, one row per (gamma, coordinate)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(TAU_HEADER)
        for rep in reports:
            for j in range(rep.tau.shape[0]):
                writer.writerow(
                    [
                        repr(float(rep.gamma)),
                        j,
                        repr(float(rep.tau[j])),
                        repr(float(rep.tau_us[j])),
                        repr(float(rep.tau_cc[j])),
                    ]
                )


def format_summary_table(reports: list[ReplicationReport]) -> str:
    """Fixed-width text table of the summary rows."""
    lines = [
        f"{'gamma':>7} {'mean_tau':>9} {'nsub/n':>8} "
        f"{'acc_full':>9} {'acc_lus':>8} {'acc_us':>8} {'acc_cc':>8} {'degen':>6}"
    ]
    for rep in reports:
        lines.append(
            f"{rep.gamma:>7.3g} {rep.mean_tau:>9.3f} {rep.subsample_fraction:>8.4f} "
            f"{rep.accuracy['full']:>9.4f} {rep.accuracy['lus']:>8.4f} "
            f"{rep.accuracy['us']:>8.4f} {rep.accuracy['cc']:>8.4f} {rep.degenerate_reps:>6d}"
        )
    return "\n".join(lines)


def render_figures(reports: list[ReplicationReport], out_dir, prefix: str = "") -> list[Path]:
    """Render the study's figures as PNGs next to the CSVs.

    Per gamma, the per-coordinate variance ratios of the three schemes;
    across gammas, mean ratio vs gamma (with the y = x target), realized
    fraction vs gamma (with the 1/gamma budget line), and accuracy vs
    realized fraction.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for rep in reports:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        coords = np.arange(rep.tau.shape[0])
        for scheme, tau in (("lus", rep.tau), ("us", rep.tau_us), ("cc", rep.tau_cc)):
            style = _SCHEME_STYLE[scheme]
            ax.plot(coords, tau, linestyle="-", markersize=4, **style)
        ax.axhline(rep.gamma, color="black", linestyle="--", linewidth=1, label=r"$\gamma$")
        ax.set_xlabel("coordinate")
        ax.set_ylabel(r"$\tau$ (variance ratio vs full MLE)")
        ax.set_title(rf"Per-coordinate $\tau$ at $\gamma$ = {rep.gamma:g}")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{prefix}tau_coordinates_gamma_{rep.gamma:g}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    gammas = np.array([rep.gamma for rep in reports])
    order = np.argsort(gammas)
    gammas = gammas[order]
    reports_sorted = [reports[i] for i in order]

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for scheme, values in (
        ("lus", [r.mean_tau for r in reports_sorted]),
        ("us", [r.mean_tau_us for r in reports_sorted]),
        ("cc", [r.mean_tau_cc for r in reports_sorted]),
    ):
        ax.plot(gammas, values, linestyle="-", markersize=5, **_SCHEME_STYLE[scheme])
    ax.plot(gammas, gammas, color="black", linestyle="--", linewidth=1, label="y = x")
    ax.set_xlabel(r"$\gamma$")
    ax.set_ylabel(r"mean $\tau$")
    ax.set_title(r"Average variance ratio vs $\gamma$")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{prefix}mean_tau_vs_gamma.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    fracs = [r.subsample_fraction for r in reports_sorted]
    ax.plot(gammas, fracs, color="tab:blue", marker="o", label="realized")
    ax.plot(gammas, 1.0 / gammas, color="black", linestyle="--", linewidth=1, label=r"$1/\gamma$ budget")
    ax.set_xlabel(r"$\gamma$")
    ax.set_ylabel("subsample fraction")
    ax.set_title(r"Subsample cost vs $\gamma$")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{prefix}fraction_vs_gamma.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for scheme in ("lus", "us", "cc"):
        ax.plot(
            fracs,
            [r.accuracy[scheme] for r in reports_sorted],
            linestyle="-",
            markersize=5,
            **_SCHEME_STYLE[scheme],
        )
    full_acc = float(np.mean([r.accuracy["full"] for r in reports_sorted]))
    ax.axhline(full_acc, color="black", linestyle="--", linewidth=1, label="full MLE")
    ax.set_xlabel("subsample fraction")
    ax.set_ylabel("test accuracy")
    ax.set_title("Accuracy vs subsample fraction")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{prefix}accuracy_vs_fraction.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written
