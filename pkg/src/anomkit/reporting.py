"""Report rendering: plain-text tables, CSV files, and matplotlib figures.

Every CLI report command writes its machine-readable JSON next to a
delimited (CSV) companion and a rendered PNG figure; this module owns the
latter two. Figures use the Agg backend so rendering works headless.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .auditing import DatasetStats, GeneratorAudit, HISTOGRAM_BINS
from .matching import ClassifiedReport, ImageMetrics, MetricsReport
from .records import View

_BIN_LABELS = [
    f"[{10 * i},{10 * (i + 1)}{']' if i == HISTOGRAM_BINS - 1 else ')'}"
    for i in range(HISTOGRAM_BINS)
]


def leaderboard_text(rows: Sequence[GeneratorAudit]) -> str:
    """Aligned plain-text leaderboard, best (lowest CAP) first."""
    headers = ("generator", "MAI ↓", "AF ↓", "CAP ↓", "images")
    table = [
        (
            row.generator_tag,
            f"{row.mean_mai:.2f}",
            f"{row.mean_af:.2f}",
            f"{row.mean_cap:.2f}",
            str(row.image_count),
        )
        for row in rows
    ]
    widths = [
        max(len(headers[col]), *(len(line[col]) for line in table)) if table else len(headers[col])
        for col in range(len(headers))
    ]
    def fmt(line):
        return "  ".join(value.ljust(width) for value, width in zip(line, widths)).rstrip()

    divider = "  ".join("-" * width for width in widths)
    return "\n".join([fmt(headers), divider, *(fmt(line) for line in table)])


def write_leaderboard_csv(rows: Sequence[GeneratorAudit], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["generator_tag", "mean_mai", "mean_af", "mean_cap", "image_count"])
        for row in rows:
            writer.writerow(
                [row.generator_tag, row.mean_mai, row.mean_af, row.mean_cap, row.image_count]
            )


def render_leaderboard(rows: Sequence[GeneratorAudit], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.5 * len(rows) + 1.5)))
    tags = [row.generator_tag for row in rows][::-1]
    caps = [row.mean_cap for row in rows][::-1]
    ax.barh(tags, caps, color="#4878a8")
    ax.set_xlabel("mean CAP (lower is better)")
    ax.set_title("Generator semantic-reasonableness leaderboard")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_stats_csv(
    datasets: Sequence[tuple[str, DatasetStats]], path: str | Path
) -> None:
    """One row per (dataset label, group); compare mode passes two datasets."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["dataset", "group", "image_count", "anomaly_count", "mean_anomalies"]
            + _BIN_LABELS
        )
        for label, stats in datasets:
            writer.writerow(
                [label, "overall", stats.overall.image_count, stats.overall.anomaly_count,
                 stats.overall.mean_anomalies, *stats.overall.severity_histogram]
            )
            for tag, group in stats.per_generator.items():
                writer.writerow(
                    [label, tag, group.image_count, group.anomaly_count,
                     group.mean_anomalies, *group.severity_histogram]
                )


def render_severity_histogram(
    stats: DatasetStats, path: str | Path, compare: DatasetStats | None = None
) -> None:
    """Severity distribution bar chart; optional second dataset overlaid."""
    fig, ax = plt.subplots(figsize=(9, 4))
    positions = range(HISTOGRAM_BINS)
    if compare is None:
        ax.bar(positions, stats.overall.severity_histogram, color="#4878a8")
    else:
        width = 0.42
        ax.bar(
            [p - width / 2 for p in positions],
            stats.overall.severity_histogram,
            width,
            label="before",
            color="#b2543d",
        )
        ax.bar(
            [p + width / 2 for p in positions],
            compare.overall.severity_histogram,
            width,
            label="after",
            color="#4878a8",
        )
        ax.legend()
    ax.set_xticks(list(positions))
    ax.set_xticklabels(_BIN_LABELS, rotation=45, ha="right")
    ax.set_xlabel("severity")
    ax.set_ylabel("anomalies")
    ax.set_title("Severity distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_count_comparison(
    before: DatasetStats, after: DatasetStats, path: str | Path
) -> None:
    """Mean annotations per image, per generator, before vs after screening."""
    tags = sorted(set(before.per_generator) | set(after.per_generator))
    fig, ax = plt.subplots(figsize=(max(5, 1.4 * len(tags) + 2), 4))
    width = 0.42
    positions = range(len(tags))
    ax.bar(
        [p - width / 2 for p in positions],
        [before.per_generator[t].mean_anomalies if t in before.per_generator else 0 for t in tags],
        width,
        label="before",
        color="#b2543d",
    )
    ax.bar(
        [p + width / 2 for p in positions],
        [after.per_generator[t].mean_anomalies if t in after.per_generator else 0 for t in tags],
        width,
        label="after",
        color="#4878a8",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(tags, rotation=30, ha="right")
    ax.set_ylabel("mean annotations per image")
    ax.set_title("Annotations per image before and after screening")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_per_image_csv(per_image: Sequence[ImageMetrics], path: str | Path) -> None:
    """Debug CSV: one row per (image, view, threshold)."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["image_id", "view", "threshold", "ap", "f1", "tp", "pred_count", "gt_count"]
        )
        for im in per_image:
            for (view, tau), metrics in im.values.items():
                writer.writerow(
                    [
                        im.image_id,
                        view.value,
                        tau,
                        metrics.ap,
                        metrics.f1,
                        im.tp_counts[(view, tau)],
                        im.pred_count,
                        im.gt_count,
                    ]
                )


def render_metric_bars(
    report: MetricsReport | ClassifiedReport, path: str | Path
) -> None:
    """Per-threshold AP and F1 grouped by view."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    views = [View.PHE, View.REA, View.FULL]
    thresholds = sorted(next(iter(report.views.values())).per_threshold)
    width = 0.8 / len(views)
    colors = {"phe": "#4878a8", "rea": "#b2543d", "full": "#6a9a58"}
    for ax, metric in zip(axes, ("ap", "f1")):
        for offset, view in enumerate(views):
            values = [
                getattr(report.views[view].per_threshold[tau], metric) for tau in thresholds
            ]
            positions = [i + offset * width for i in range(len(thresholds))]
            ax.bar(positions, values, width, label=view.value, color=colors[view.value])
        ax.set_xticks([i + width for i in range(len(thresholds))])
        ax.set_xticklabels([f"{tau:g}" for tau in thresholds])
        ax.set_xlabel("threshold")
        ax.set_ylim(0, 1.05)
        ax.set_title(metric.upper())
    axes[0].set_ylabel("score")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
