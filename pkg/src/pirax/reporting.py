"""File renderings of a scenario-matrix run: JSON, CSV, and a verdict figure.

Written by ``pirax sim all --report-dir``. The figure is a step-by-step
grid (scenarios x steps) so a regression is visible as a red cell at the
exact step that diverged.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


def write_report_files(summary: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _write_json(summary, out / "reports.json"),
        _write_csv(summary, out / "summary.csv"),
        _write_figure(summary, out / "verdict-matrix.png"),
    ]
    return written


def _write_json(summary: dict, path: Path) -> Path:
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(summary: dict, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "seed", "steps", "matched_steps", "pass"])
        for report in summary["reports"]:
            matched = sum(
                1 for got, want in zip(report["observed"], report["expected"]) if got == want
            )
            writer.writerow(
                [report["name"], report["seed"], len(report["steps"]), matched,
                 str(report["pass"]).lower()]
            )
    return path


def _write_figure(summary: dict, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap
    from matplotlib.patches import Patch

    reports = summary["reports"]
    n_rows = len(reports)
    n_cols = max(len(r["steps"]) for r in reports)

    # 0 = unused, 1 = step matched, 2 = step diverged
    grid = [[0] * n_cols for _ in range(n_rows)]
    for i, report in enumerate(reports):
        for j, (got, want) in enumerate(zip(report["observed"], report["expected"])):
            grid[i][j] = 1 if got == want else 2

    fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * n_cols + 3.2), 0.42 * n_rows + 1.6))
    cmap = ListedColormap(["#e8e8e8", "#2e8b57", "#c0392b"])
    ax.imshow(grid, cmap=cmap, vmin=0, vmax=2, aspect="auto")
    ax.set_yticks(range(n_rows))
    ax.set_yticklabels([r["name"] for r in reports], fontsize=8)
    ax.set_xticks(range(n_cols))
    ax.set_xticklabels([str(j + 1) for j in range(n_cols)], fontsize=7)
    ax.set_xlabel("scenario step")
    ax.set_title(
        f"scenario verdicts (seed={summary['seed']}): "
        f"{summary['passed']}/{summary['total']} passed"
    )
    ax.legend(
        handles=[
            Patch(color="#2e8b57", label="as expected"),
            Patch(color="#c0392b", label="diverged"),
        ],
        loc="upper right",
        fontsize=7,
        framealpha=0.9,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
