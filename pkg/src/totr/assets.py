"""Video document loading, filtering, scene dedup, and proper-noun masking.

Scene detection, OCR, and speech recognition all happen upstream; this module
consumes their sidecar files laid out as:

    assets/<video_id>/meta.json        {"video_id","title","duration_s","view_count","upload_date","available"}
    assets/<video_id>/scenes/<index 4-digit>.jpg
    assets/<video_id>/ocr.jsonl        one {"index","start_s","text"} per scene, index-ordered
    assets/<video_id>/transcript.txt   UTF-8 plain text
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .clients import NerClient, ServiceUnavailable

log = logging.getLogger(__name__)

MAX_DURATION_S = 600.0
DEFAULT_SCENE_CAP = 30

_SENTENCE_END_RE = re.compile(r"[.!?]$")
_TOKEN_RE = re.compile(r"\S+")


class AssetError(Exception):
    pass


class MissingMetadata(AssetError):
    """meta.json is absent or unreadable."""


class SchemaMismatch(AssetError):
    """Sidecar files disagree (e.g. OCR line count != scene count)."""


@dataclass(frozen=True)
class Scene:
    index: int
    start_s: float
    image_path: str
    ocr_text: str = ""


@dataclass(frozen=True)
class VideoAsset:
    video_id: str
    title: str
    duration_s: float | None
    scenes: tuple[Scene, ...]
    transcript: str
    available: bool = True
    view_count: int | None = None
    upload_date: str | None = None
    deduped_scene_indices: tuple[int, ...] = ()

    def document_text(self) -> str:
        """Transcript + per-scene OCR block, the text half of a video document."""
        lines = [f"Title: {self.title}", f"Transcript: {self.transcript}"]
        ocr = [s.ocr_text for s in self.deduped_scenes() if s.ocr_text.strip()]
        lines.append("OCR: " + " | ".join(ocr))
        return "\n".join(lines)

    def deduped_scenes(self) -> tuple[Scene, ...]:
        by_index = {s.index: s for s in self.scenes}
        return tuple(by_index[i] for i in self.deduped_scene_indices)

    def to_json(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "title": self.title,
            "duration_s": self.duration_s,
            "available": self.available,
            "view_count": self.view_count,
            "upload_date": self.upload_date,
            "transcript": self.transcript,
            "scenes": [
                {
                    "index": s.index,
                    "start_s": s.start_s,
                    "image_path": s.image_path,
                    "ocr_text": s.ocr_text,
                }
                for s in self.scenes
            ],
            "deduped_scene_indices": list(self.deduped_scene_indices),
        }

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "VideoAsset":
        return cls(
            video_id=str(raw["video_id"]),
            title=str(raw.get("title") or ""),
            duration_s=None if raw.get("duration_s") is None else float(raw["duration_s"]),
            scenes=tuple(
                Scene(
                    index=int(s["index"]),
                    start_s=float(s.get("start_s") or 0.0),
                    image_path=str(s.get("image_path") or ""),
                    ocr_text=str(s.get("ocr_text") or ""),
                )
                for s in raw.get("scenes") or ()
            ),
            transcript=str(raw.get("transcript") or ""),
            available=bool(raw.get("available", True)),
            view_count=raw.get("view_count"),
            upload_date=raw.get("upload_date"),
            deduped_scene_indices=tuple(raw.get("deduped_scene_indices") or ()),
        )


@dataclass
class AssetFilterReport:
    kept: int = 0
    too_long: int = 0
    unavailable: int = 0
    no_metadata: int = 0

    def to_json(self) -> dict[str, int]:
        return {
            "kept": self.kept,
            "too_long": self.too_long,
            "unavailable": self.unavailable,
            "no_metadata": self.no_metadata,
        }


def load_asset(asset_dir: str | Path) -> VideoAsset:
    """Load one asset directory atomically: any inconsistency raises, nothing partial."""
    asset_dir = Path(asset_dir)
    meta_path = asset_dir / "meta.json"
    if not meta_path.is_file():
        raise MissingMetadata(f"{asset_dir}: meta.json not found")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise MissingMetadata(f"{meta_path}: unreadable metadata: {err}") from err
    if not isinstance(meta, dict) or not meta.get("video_id"):
        raise MissingMetadata(f"{meta_path}: missing video_id")

    scene_dir = asset_dir / "scenes"
    image_paths = sorted(scene_dir.glob("*.jpg")) if scene_dir.is_dir() else []

    ocr_rows: list[dict[str, Any]] = []
    ocr_path = asset_dir / "ocr.jsonl"
    if ocr_path.is_file():
        for line in ocr_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                ocr_rows.append(json.loads(line))
    if len(ocr_rows) != len(image_paths):
        raise SchemaMismatch(
            f"{asset_dir}: {len(ocr_rows)} OCR lines for {len(image_paths)} scene images"
        )

    scenes: list[Scene] = []
    previous_index = -1
    previous_start = float("-inf")
    for image_path, row in zip(image_paths, ocr_rows):
        index = int(row["index"])
        start_s = float(row.get("start_s") or 0.0)
        if index <= previous_index or start_s < previous_start:
            raise SchemaMismatch(f"{asset_dir}: scene indices/starts not increasing at {index}")
        previous_index, previous_start = index, start_s
        expected = f"{index:04d}.jpg"
        if image_path.name != expected:
            raise SchemaMismatch(f"{asset_dir}: image {image_path.name}, OCR row {expected}")
        scenes.append(
            Scene(
                index=index,
                start_s=start_s,
                image_path=str(Path(meta["video_id"]) / "scenes" / image_path.name),
                ocr_text=str(row.get("text") or ""),
            )
        )

    transcript_path = asset_dir / "transcript.txt"
    transcript = transcript_path.read_text(encoding="utf-8") if transcript_path.is_file() else ""

    duration = meta.get("duration_s")
    return VideoAsset(
        video_id=str(meta["video_id"]),
        title=str(meta.get("title") or ""),
        duration_s=None if duration is None else float(duration),
        scenes=tuple(scenes),
        transcript=transcript,
        available=bool(meta.get("available", True)),
        view_count=meta.get("view_count"),
        upload_date=meta.get("upload_date"),
    )


def filter_video_assets(
    assets: Iterable[VideoAsset], report: AssetFilterReport | None = None
) -> Iterator[VideoAsset]:
    """Keep available assets strictly shorter than 600 seconds."""
    for asset in assets:
        if asset.duration_s is None:
            if report is not None:
                report.no_metadata += 1
            continue
        if not asset.available:
            if report is not None:
                report.unavailable += 1
            continue
        if asset.duration_s >= MAX_DURATION_S:
            if report is not None:
                report.too_long += 1
            continue
        if report is not None:
            report.kept += 1
        yield asset


def _normalize_ocr(text: str) -> str:
    return " ".join(text.split()).lower()


def dedup_scenes(scenes: Sequence[Scene], cap: int = DEFAULT_SCENE_CAP) -> list[int]:
    """Indices of scenes whose normalized OCR differs from the previous scene.

    The first scene is always kept. When more than `cap` survive, they are
    downsampled uniformly in time to exactly `cap`, keeping first and last.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not scenes:
        return []
    ordered = sorted(scenes, key=lambda s: s.index)
    kept = [ordered[0].index]
    for previous, current in zip(ordered, ordered[1:]):
        if _normalize_ocr(current.ocr_text) != _normalize_ocr(previous.ocr_text):
            kept.append(current.index)
    if len(kept) <= cap:
        return kept
    if cap == 1:
        return [kept[0]]
    step = (len(kept) - 1) / (cap - 1)
    return [kept[round(j * step)] for j in range(cap)]


def with_dedup(asset: VideoAsset, cap: int = DEFAULT_SCENE_CAP) -> VideoAsset:
    return replace(asset, deduped_scene_indices=tuple(dedup_scenes(asset.scenes, cap)))


# ---------------------------------------------------------------------------
# Proper-noun masking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaskedAsset:
    asset: VideoAsset
    used_fallback: bool = False


def _apply_spans(text: str, spans: Sequence[tuple[int, int, str]]) -> str:
    """Remove character spans, then collapse the double spaces left behind."""
    merged: list[tuple[int, int]] = []
    for start, end, _ in sorted(spans):
        start, end = max(0, start), min(len(text), end)
        if start >= end:
            continue
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    pieces: list[str] = []
    cursor = 0
    for start, end in merged:
        pieces.append(text[cursor:start])
        cursor = end
    pieces.append(text[cursor:])
    out = "".join(pieces)
    out = re.sub(r" {2,}", " ", out)
    out = re.sub(r" +([.,;:!?])", r"\1", out)
    return out.strip()


def _heuristic_spans(text: str) -> list[tuple[int, int, str]]:
    """Capitalized token runs, excluding runs that begin a sentence."""
    tokens = list(_TOKEN_RE.finditer(text))
    spans: list[tuple[int, int, str]] = []
    run_start: int | None = None
    run_end = 0
    run_is_sentence_initial = False

    def flush() -> None:
        nonlocal run_start
        if run_start is not None and not run_is_sentence_initial:
            spans.append((run_start, run_end, "heuristic"))
        run_start = None

    sentence_start = True
    for match in tokens:
        token = match.group(0)
        capitalized = token[0].isupper()
        if capitalized:
            if run_start is None:
                run_start = match.start()
                run_is_sentence_initial = sentence_start
            run_end = match.end()
        else:
            flush()
        sentence_start = bool(_SENTENCE_END_RE.search(token.rstrip("\"')")))
    flush()
    return spans


def mask_text(
    text: str, ner: NerClient | None = None
) -> tuple[str, bool]:
    """(masked text, used_fallback). Entity spans are replaced by nothing at all."""
    if not text:
        return text, False
    if ner is not None:
        try:
            return _apply_spans(text, ner.spans(text)), False
        except ServiceUnavailable:
            log.warning("NER service unreachable; using the capitalization heuristic")
    return _apply_spans(text, _heuristic_spans(text)), True


def mask_proper_nouns(asset: VideoAsset, ner: NerClient | None = None) -> MaskedAsset:
    """Mask proper nouns out of the transcript and every scene's OCR text."""
    transcript, fallback = mask_text(asset.transcript, ner)
    scenes: list[Scene] = []
    for scene in asset.scenes:
        ocr_text, ocr_fallback = mask_text(scene.ocr_text, ner)
        fallback = fallback or ocr_fallback
        scenes.append(replace(scene, ocr_text=ocr_text))
    masked = replace(asset, transcript=transcript, scenes=tuple(scenes))
    return MaskedAsset(asset=masked, used_fallback=fallback)


def load_asset_index(
    root: str | Path,
    *,
    cap: int = DEFAULT_SCENE_CAP,
    ner: NerClient | None = None,
    mask: bool = False,
    report: AssetFilterReport | None = None,
) -> list[VideoAsset]:
    """Load, filter, and dedup every asset under `root`, sorted by video id."""
    root = Path(root)
    loaded: list[VideoAsset] = []
    for asset_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            loaded.append(load_asset(asset_dir))
        except MissingMetadata:
            if report is not None:
                report.no_metadata += 1
            log.warning("%s: skipped, missing metadata", asset_dir)
        except SchemaMismatch as err:
            if report is not None:
                report.no_metadata += 1
            log.warning("%s", err)
    kept = list(filter_video_assets(loaded, report))
    out: list[VideoAsset] = []
    for asset in kept:
        if mask:
            asset = mask_proper_nouns(asset, ner).asset
        out.append(with_dedup(asset, cap))
    return sorted(out, key=lambda a: a.video_id)
