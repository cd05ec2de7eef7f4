"""HTTP search service over an immutable loaded index.

Read-only by design: searches never mutate corpus files, and the only write
path is the append-only feedback log. Reload builds a whole new state object
and swaps it in one reference assignment, so in-flight requests finish on the
version they started with.
"""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .assets import VideoAsset
from .clients import make_embedder
from .contrastive import AdapterState, apply_adapter
from .embedding import (
    EmbeddingMatrix,
    EmbedRequest,
    RequestKind,
    knn_search,
    load_matrix,
    normalize,
)
from .jsonl import append_jsonl, read_jsonl
from .prompts import RETRIEVAL_INSTRUCTION

log = logging.getLogger(__name__)

MAX_K = 100
SNIPPET_CHARS = 200


@dataclass(frozen=True)
class ServeConfig:
    index_path: str
    assets_index_path: str
    assets_root: str
    embedder_url: str
    adapter_path: str | None = None
    use_instruction: bool = True
    feedback_log: str = "feedback.jsonl"
    host: str = "127.0.0.1"
    port: int = 8080


class SearchRequest(BaseModel):
    query_text: str = Field(min_length=1)
    k: int = Field(default=10, ge=1, le=MAX_K)


class SearchHit(BaseModel):
    video_id: str
    score: float
    title: str
    top_scene_paths: list[str]
    transcript_snippet: str


class SearchResponse(BaseModel):
    results: list[SearchHit]
    latency_ms: float
    index_version: str


class FeedbackRequest(BaseModel):
    query_id: str = Field(min_length=1)
    chosen_video_id: str = Field(min_length=1)


def _file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _snippet(text: str) -> str:
    collapsed = " ".join(text.split())
    return collapsed[:SNIPPET_CHARS]


@dataclass(frozen=True)
class _IndexState:
    docs: EmbeddingMatrix
    assets: dict[str, VideoAsset]
    adapter: AdapterState | None
    index_version: str
    corpus_hash: str
    adapter_hash: str | None


class SearchEngine:
    """Loads the corpus once and answers identical requests identically."""

    def __init__(self, config: ServeConfig, embedder=None):
        self.config = config
        self.embedder = embedder if embedder is not None else make_embedder(config.embedder_url)
        self._state = self._load_state()

    def _load_state(self) -> _IndexState:
        index_path = Path(self.config.index_path)
        if not index_path.is_file():
            raise FileNotFoundError(
                f"index {index_path} not found; run `totr embed` to build it first"
            )
        docs = normalize(load_matrix(index_path))
        corpus_hash = _file_sha256(index_path)

        adapter = None
        adapter_hash = None
        if self.config.adapter_path:
            adapter = AdapterState.load(self.config.adapter_path)
            adapter_hash = _file_sha256(self.config.adapter_path)
            docs = apply_adapter(adapter, docs)

        assets: dict[str, VideoAsset] = {}
        assets_index = Path(self.config.assets_index_path)
        if assets_index.is_file():
            for row in read_jsonl(assets_index):
                asset = VideoAsset.from_json(row)
                assets[asset.video_id] = asset

        version = hashlib.sha256(
            (corpus_hash + (adapter_hash or "")).encode("ascii")
        ).hexdigest()[:16]
        return _IndexState(
            docs=docs,
            assets=assets,
            adapter=adapter,
            index_version=version,
            corpus_hash=corpus_hash,
            adapter_hash=adapter_hash,
        )

    def reload(self) -> None:
        self._state = self._load_state()

    @property
    def state(self) -> _IndexState:
        return self._state

    def embed_query(self, query_text: str, state: _IndexState) -> np.ndarray:
        instruction = RETRIEVAL_INSTRUCTION if self.config.use_instruction else None
        request = EmbedRequest(kind=RequestKind.QUERY_TEXT, text=query_text)
        vectors = np.asarray(self.embedder.embed(instruction, [request]), dtype=np.float64)
        vector = vectors[0]
        if state.adapter is not None:
            vector = state.adapter.weight @ vector
        return vector

    def search(self, request: SearchRequest) -> SearchResponse:
        state = self._state
        started = time.perf_counter()
        query = self.embed_query(request.query_text, state)
        hits = knn_search(state.docs, query, request.k)
        results = []
        for video_id, score in hits:
            asset = state.assets.get(video_id)
            scenes = [s.image_path for s in asset.deduped_scenes()][:3] if asset else []
            results.append(
                SearchHit(
                    video_id=video_id,
                    score=score,
                    title=asset.title if asset else "",
                    top_scene_paths=scenes,
                    transcript_snippet=_snippet(asset.transcript) if asset else "",
                )
            )
        return SearchResponse(
            results=results,
            latency_ms=(time.perf_counter() - started) * 1000.0,
            index_version=state.index_version,
        )


def create_app(config: ServeConfig, embedder=None) -> FastAPI:
    engine = SearchEngine(config, embedder=embedder)
    app = FastAPI(title="totr search service", version=__version__)
    app.state.engine = engine

    @app.post("/v1/search", response_model=SearchResponse)
    def search(request: SearchRequest) -> SearchResponse:
        return engine.search(request)

    @app.get("/v1/assets/{video_id}")
    def asset_metadata(video_id: str) -> dict[str, Any]:
        asset = engine.state.assets.get(video_id)
        if asset is None:
            raise HTTPException(status_code=404, detail=f"unknown video_id {video_id}")
        return {
            "video_id": asset.video_id,
            "title": asset.title,
            "duration_s": asset.duration_s,
            "view_count": asset.view_count,
            "upload_date": asset.upload_date,
            "scene_paths": [s.image_path for s in asset.deduped_scenes()],
            "transcript_snippet": _snippet(asset.transcript),
        }

    @app.get("/v1/health")
    def health() -> dict[str, Any]:
        state = engine.state
        return {
            "status": "ok",
            "index_version": state.index_version,
            "corpus_hash": state.corpus_hash,
            "adapter_hash": state.adapter_hash,
            "n_docs": len(state.docs),
        }

    @app.post("/v1/feedback")
    def feedback(request: FeedbackRequest) -> dict[str, Any]:
        append_jsonl(
            engine.config.feedback_log,
            {
                "ts": int(time.time()),
                "query_id": request.query_id,
                "chosen_video_id": request.chosen_video_id,
            },
        )
        return {"ok": True}

    media_root = Path(config.assets_root)
    if media_root.is_dir():
        app.mount("/media", StaticFiles(directory=str(media_root)), name="media")
    return app


def serve(config: ServeConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
