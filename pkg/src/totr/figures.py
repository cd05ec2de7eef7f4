"""Render analysis and evaluation reports as PNG figures next to the data files."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import ContentStat


def render_analysis_figures(
    stats: Sequence[ContentStat],
    report: Mapping[str, Any],
    out_dir: str | Path,
) -> list[Path]:
    """Scatter, bar, and histogram views of the analysis report; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    pairs = [
        (s.external_views, s.search_count)
        for s in stats
        if s.external_views is not None
    ]
    if pairs:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.scatter([v for v, _ in pairs], [c for _, c in pairs], s=12, alpha=0.6)
        ax.set_xscale("log")
        ax.set_xlabel("external views")
        ax.set_ylabel("search count")
        ax.set_title("External popularity vs. searches")
        path = out_dir / "views_vs_searches.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    genres = report.get("genres", {})
    with_times = {
        g: row["mean_response_hours"]
        for g, row in genres.items()
        if row.get("mean_response_hours") is not None
    }
    if with_times:
        fig, ax = plt.subplots(figsize=(6, 4))
        names = sorted(with_times, key=lambda g: with_times[g])
        ax.barh(names, [with_times[g] for g in names])
        ax.set_xlabel("mean response time (hours)")
        ax.set_title("Response time by genre")
        path = out_dir / "response_time_by_genre.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    years = [s.days_since_release // 365 for s in stats if s.days_since_release is not None]
    if years:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(years, bins=range(0, max(years) + 2), edgecolor="white")
        ax.set_xlabel("years since release")
        ax.set_ylabel("posts")
        ax.set_title("Searches by content age")
        path = out_dir / "posts_by_years_since_release.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written


def render_eval_figure(result_doc: Mapping[str, Any], out_dir: str | Path) -> Path:
    """Recall@k / MRR@k curves for one evaluation result."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    recall = {int(k): v for k, v in result_doc["recall"].items()}
    mrr = {int(k): v for k, v in result_doc["mrr"].items()}
    ks = sorted(recall)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, [recall[k] for k in ks], marker="o", label="recall@k")
    ax.plot(ks, [mrr[k] for k in ks], marker="s", label="mrr@k")
    ax.set_xscale("log")
    ax.set_xticks(ks, [str(k) for k in ks])
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("k")
    ax.set_ylabel("score")
    ax.legend()
    ax.set_title("Retrieval metrics by cutoff")
    path = out_dir / "metrics_by_k.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path
