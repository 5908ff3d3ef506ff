"""Matplotlib figures for the metrics report.

Both functions take the JSON form of a metrics report so they can be
driven from a saved trace directory without re-running anything.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

# Fixed metadata keeps PNG bytes stable between runs.
PNG_METADATA = {"Software": None}


def timeline_figure(metrics: dict, path: str | Path) -> Path:
    """Gantt-style chart: one row per moment, one mark per occurrence.

    Mark width shows the baseline cost in days, so repeated moments and
    their burden are visible across the whole career.
    """
    rows = [r["moment"] for r in metrics["rows"]]
    fig, ax = plt.subplots(figsize=(9, 4.2))
    for t in metrics["timeline"]:
        y = rows.index(t["row"])
        start = mdates.date2num(date.fromisoformat(t["start"]))
        width = max(t["baseline_days"], 1.0) * 7  # a working day drawn as a calendar week
        ax.broken_barh([(start, width)], (y - 0.35, 0.7), facecolors="tab:red", alpha=0.6)
        ax.broken_barh([(start, 2)], (y - 0.35, 0.7), facecolors="tab:blue")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(rows)
    ax.invert_yaxis()
    ax.xaxis_date()
    ax.xaxis.set_major_locator(mdates.YearLocator())
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y"))
    ax.set_title("Identity moments across the career (red: baseline burden, blue: SSI)")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110, metadata=PNG_METADATA)
    plt.close(fig)
    return out


def savings_figure(metrics: dict, path: str | Path) -> Path:
    """Horizontal bars of baseline against SSI days for each moment row."""
    rows = metrics["rows"]
    names = [r["moment"] for r in rows]
    y = range(len(rows))
    fig, ax = plt.subplots(figsize=(8, 4.2))
    ax.barh([i - 0.2 for i in y], [r["baseline_days"] for r in rows], height=0.4,
            color="tab:red", label="baseline (days)")
    ax.barh([i + 0.2 for i in y], [r["ssi_days"] for r in rows], height=0.4,
            color="tab:blue", label="SSI (days)")
    for i, r in zip(y, rows):
        if r["assumed"]:
            ax.text(r["baseline_days"], i - 0.2, " incl. assumed", va="center", fontsize=7, color="0.4")
    ax.set_yticks(list(y))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("working days")
    totals = metrics["totals"]
    ax.set_title(
        f"Time per moment: {totals['baseline_days']:.1f} baseline vs {totals['ssi_days']:.2f} SSI days"
    )
    ax.set_xlim(0, 1.3 * max([r["baseline_days"] for r in rows] + [1.0]))
    ax.legend(loc="upper right")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110, metadata=PNG_METADATA)
    plt.close(fig)
    return out


def render_metrics_figures(metrics: dict, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        timeline_figure(metrics, directory / "timeline.png"),
        savings_figure(metrics, directory / "savings.png"),
    ]
