"""Popularity and genre analytics over curated content statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .curation import RawPost, SolvedResolution

MIN_GENRE_SUPPORT = 5
UNKNOWN_GENRE = "unknown"


@dataclass(frozen=True)
class ContentStat:
    content_id: str
    search_count: int = 0
    external_views: int | None = None
    response_time_s: float | None = None
    genre: str | None = None
    days_since_release: int | None = None

    def __post_init__(self) -> None:
        if self.search_count < 0:
            raise ValueError(f"{self.content_id}: search_count must be >= 0")
        if self.external_views is not None and self.external_views < 0:
            raise ValueError(f"{self.content_id}: external_views must be >= 0")

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "ContentStat":
        return cls(
            content_id=str(raw["content_id"]),
            search_count=int(raw.get("search_count") or 0),
            external_views=None if raw.get("external_views") is None else int(raw["external_views"]),
            response_time_s=None if raw.get("response_time_s") is None else float(raw["response_time_s"]),
            genre=raw.get("genre"),
            days_since_release=None
            if raw.get("days_since_release") is None
            else int(raw["days_since_release"]),
        )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; needs >= 2 points and nonzero variance."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.dot(dx, dx)))
    sy = float(np.sqrt(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance series")
    r = float(np.dot(dx, dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties averaged."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson over average ranks; robust companion for heavy-tailed counts."""
    return pearson(average_ranks(xs), average_ranks(ys))


def response_time(post: RawPost, resolution: SolvedResolution) -> int:
    """Seconds between the post and its solving comment."""
    if resolution.solved_at is None:
        raise ValueError(f"{post.post_id}: resolution has no solved_at timestamp")
    delta = resolution.solved_at - post.created_at
    if delta < 0:
        raise ValueError(f"{post.post_id}: solved before it was posted ({delta}s)")
    return delta


def genre_stats(
    stats: Sequence[ContentStat], min_support: int = MIN_GENRE_SUPPORT
) -> dict[str, dict[str, Any]]:
    """Per-genre aggregates; genres below `min_support` posts are flagged."""
    groups: dict[str, list[ContentStat]] = {}
    for stat in stats:
        groups.setdefault(stat.genre or UNKNOWN_GENRE, []).append(stat)

    report: dict[str, dict[str, Any]] = {}
    for genre in sorted(groups):
        rows = groups[genre]
        times = [s.response_time_s for s in rows if s.response_time_s is not None]
        histogram: dict[str, int] = {}
        for stat in rows:
            if stat.days_since_release is not None:
                years = str(stat.days_since_release // 365)
                histogram[years] = histogram.get(years, 0) + 1
        report[genre] = {
            "post_count": len(rows),
            "mean_response_hours": (sum(times) / len(times) / 3600.0) if times else None,
            "posts_by_years_since_release": dict(sorted(histogram.items(), key=lambda kv: int(kv[0]))),
            "low_support": len(rows) < min_support,
        }
    return report


def _paired(
    stats: Sequence[ContentStat], x_field: str, y_field: str
) -> tuple[list[float], list[float]]:
    xs: list[float] = []
    ys: list[float] = []
    for stat in stats:
        x = getattr(stat, x_field)
        y = getattr(stat, y_field)
        if x is not None and y is not None:
            xs.append(float(x))
            ys.append(float(y))
    return xs, ys


def _correlation_block(xs: Sequence[float], ys: Sequence[float]) -> dict[str, Any]:
    block: dict[str, Any] = {"n": len(xs)}
    try:
        block["pearson"] = pearson(xs, ys)
        block["spearman"] = spearman(xs, ys)
    except ValueError as err:
        block["pearson"] = block["spearman"] = None
        block["reason"] = str(err)
    return block


def analyze_content_stats(
    stats: Sequence[ContentStat],
    *,
    log_views: bool = True,
    min_support: int = MIN_GENRE_SUPPORT,
) -> dict[str, Any]:
    """Correlation and genre report backing the popularity analyses.

    View counts are log1p-transformed before Pearson by default; their heavy
    tail otherwise lets a handful of viral items dominate the correlation.
    """
    views_vs_searches = _paired(stats, "external_views", "search_count")
    views_vs_response = _paired(stats, "external_views", "response_time_s")

    def transform(values: Sequence[float]) -> list[float]:
        return [float(np.log1p(v)) for v in values] if log_views else list(values)

    return {
        "n_items": len(stats),
        "views_transform": "log1p" if log_views else "raw",
        "views_vs_search_count": _correlation_block(
            transform(views_vs_searches[0]), views_vs_searches[1]
        ),
        "views_vs_response_time": _correlation_block(
            transform(views_vs_response[0]), views_vs_response[1]
        ),
        "genres": genre_stats(stats, min_support),
    }
