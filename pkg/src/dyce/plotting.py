"""Static figure rendering for sweep outputs.

Figures are written to files next to the delimited outputs; nothing here is
interactive.
"""

from __future__ import annotations

import csv
from pathlib import Path


def _read_frontier_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {
                "lambda": float(row["lambda"]),
                "A": float(row["A"]),
                "C": float(row["C"]),
                "f": float(row["f"]),
            }
            for row in csv.DictReader(fh)
        ]


def render_frontier(
    frontier_csv: str | Path,
    out_path: str | Path,
    pareto_csv: str | Path | None = None,
    title: str = "Accuracy/complexity frontier",
) -> Path:
    """Render relative accuracy against relative complexity to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    entries = _read_frontier_csv(Path(frontier_csv))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.scatter(
        [e["C"] for e in entries],
        [e["A"] for e in entries],
        s=18,
        color="tab:red",
        label="searched configurations",
        zorder=3,
    )
    if pareto_csv is not None and Path(pareto_csv).is_file():
        pareto = _read_frontier_csv(Path(pareto_csv))
        ax.plot(
            [e["C"] for e in pareto],
            [e["A"] for e in pareto],
            color="tab:purple",
            marker="o",
            markersize=3,
            linewidth=1.2,
            label="non-dominated subset",
            zorder=2,
        )
    ax.axhline(1.0, color="grey", linewidth=0.8, linestyle="--", zorder=1)
    ax.set_xlabel("relative complexity C")
    ax.set_ylabel("relative accuracy A")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
