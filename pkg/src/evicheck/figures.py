"""Report figures, written as PNG next to the text/TSV/JSON output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .reporting import DIRECT_ROWS, FACT_ROWS, SUPPORT_ROWS, RunReport


def _color(row: str) -> str:
    return {
        "Yes": "#2a9d8f", "Supported": "#2a9d8f",
        "No": "#e76f51", "Contradictory": "#e76f51",
        "NotRelated": "#8d99ae", "Neither": "#8d99ae",
        "Unparseable": "#e9c46a", "Error": "#9b2226",
    }.get(row, "#577590")


def _grouped_bars(ax, report: RunReport, table: str, rows: tuple[str, ...], title: str):
    columns = report.columns(table)
    present_rows = [r for r in rows if any(report.count(table, c, r) for c in columns)]
    if not columns or not present_rows:
        ax.set_visible(False)
        return
    width = 0.8 / len(present_rows)
    for i, row in enumerate(present_rows):
        xs = [j + i * width for j in range(len(columns))]
        ys = [report.count(table, c, row) for c in columns]
        ax.bar(xs, ys, width=width, label=row, color=_color(row))
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(columns))])
    ax.set_xticklabels(columns)
    ax.set_ylabel("records")
    ax.set_title(title)
    ax.legend(fontsize=8)


def render_figures(report: RunReport, out_dir) -> list[Path]:
    """One verdict-distribution figure per table present in the report;
    fact reports also get the per-query average chart."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if report.kind == "answer":
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        _grouped_bars(axes[0], report, "direct", DIRECT_ROWS, "Direct-answer gate")
        _grouped_bars(axes[1], report, "support", SUPPORT_ROWS, "Support verdicts")
        fig.tight_layout()
        path = out_dir / "answer_report.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    else:
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
        _grouped_bars(axes[0], report, "fact", FACT_ROWS, "Statement verdicts")
        columns = [c for c in report.columns("fact") if c in report.fact_extras]
        if columns:
            metrics = [
                ("avg_pct_supported_per_query", "Supported"),
                ("avg_pct_contradictory_per_query", "Contradictory"),
                ("avg_pct_neither_per_query", "Neither"),
            ]
            width = 0.8 / len(metrics)
            for i, (key, label) in enumerate(metrics):
                xs = [j + i * width for j in range(len(columns))]
                ys = [report.fact_extras[c][key] for c in columns]
                axes[1].bar(xs, ys, width=width, label=label, color=_color(label))
            axes[1].set_xticks([j + 0.4 - width / 2 for j in range(len(columns))])
            axes[1].set_xticklabels(columns)
            axes[1].set_ylabel("avg % per query")
            axes[1].set_title("Per-question averages")
            axes[1].legend(fontsize=8)
        else:
            axes[1].set_visible(False)
        fig.tight_layout()
        path = out_dir / "facts_report.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
