import csv

import numpy as np

from lus.report import (
    SUMMARY_HEADER,
    TAU_HEADER,
    format_summary_table,
    render_figures,
    write_summary_csv,
    write_tau_csv,
)
from lus.simulate import ReplicationReport


def _fake_reports():
    coords = 6
    reports = []
    for gamma in (1.5, 3.0):
        rng = np.random.default_rng(int(gamma * 10))
        reports.append(
            ReplicationReport(
                gamma=gamma,
                reps=20,
                tau=gamma * (1 + 0.05 * rng.standard_normal(coords)),
                tau_us=gamma * 4 * (1 + 0.05 * rng.standard_normal(coords)),
                tau_cc=gamma * 2 * (1 + 0.05 * rng.standard_normal(coords)),
                subsample_fraction=0.3 / gamma,
                accuracy={"full": 0.96, "lus": 0.958, "us": 0.94, "cc": 0.95},
                degenerate_reps=0,
            )
        )
    return reports


def test_summary_csv_layout(tmp_path):
    path = tmp_path / "summary.csv"
    write_summary_csv(_fake_reports(), path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == SUMMARY_HEADER
    assert len(rows) == 3
    gammas = [float(r[0]) for r in rows[1:]]
    assert gammas == [1.5, 3.0]
    for row in rows[1:]:
        values = [float(tok) for tok in row]
        assert all(np.isfinite(values))
        assert values[1] > 0  # mean_tau


def test_tau_csv_layout(tmp_path):
    path = tmp_path / "tau.csv"
    reports = _fake_reports()
    write_tau_csv(reports, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TAU_HEADER
    assert len(rows) == 1 + 2 * 6
    first = rows[1]
    assert float(first[0]) == 1.5 and int(first[1]) == 0
    assert float(first[2]) == reports[0].tau[0]


def test_render_figures_writes_pngs(tmp_path):
    written = render_figures(_fake_reports(), tmp_path)
    # one per-gamma figure each, plus the three cross-gamma figures
    assert len(written) == 2 + 3
    for path in written:
        assert path.exists()
        assert path.stat().st_size > 1000
        assert path.suffix == ".png"


def test_format_summary_table():
    table = format_summary_table(_fake_reports())
    lines = table.splitlines()
    assert len(lines) == 3
    assert "mean_tau" in lines[0]
    assert "1.5" in lines[1]
