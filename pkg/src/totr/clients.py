"""Wire clients for the external judge, embedder, and NER services.

Every external model sits behind a small HTTP contract so the engine can run
against real services, local stand-ins, or the deterministic stub embedder
(`stub://<dim>` URLs) without code changes.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .embedding import EmbedRequest


class ServiceUnavailable(Exception):
    """The remote service stayed unreachable after all retries."""


@dataclass(frozen=True)
class HttpConfig:
    timeout_s: float = 30.0
    retries: int = 2
    backoff_s: float = 0.2


class JudgeClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class NerClient(Protocol):
    def spans(self, text: str) -> list[tuple[int, int, str]]: ...


def _post_with_retries(url: str, payload: dict, config: HttpConfig) -> dict:
    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        try:
            response = httpx.post(url, json=payload, timeout=config.timeout_s)
            response.raise_for_status()
            return response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as err:
            last_error = err
            if attempt < config.retries:
                time.sleep(config.backoff_s * (attempt + 1))
    raise ServiceUnavailable(f"POST {url} failed after {config.retries + 1} attempts: {last_error}")


class HttpJudgeClient:
    """POST /v1/judge {"prompt"} -> {"text"}."""

    def __init__(self, base_url: str, config: HttpConfig | None = None):
        self.base_url = base_url.rstrip("/")
        self.config = config or HttpConfig()

    def complete(self, prompt: str) -> str:
        body = _post_with_retries(f"{self.base_url}/v1/judge", {"prompt": prompt}, self.config)
        return str(body["text"])


class HttpEmbedderClient:
    """POST /v1/embed {"instruction", "items": [{"text", "image_paths"}]} -> {"dim", "vectors"}."""

    def __init__(self, base_url: str, config: HttpConfig | None = None):
        self.base_url = base_url.rstrip("/")
        self.config = config or HttpConfig()

    def embed(self, instruction: str | None, items: Sequence[EmbedRequest]) -> np.ndarray:
        payload = {
            "instruction": instruction,
            "items": [
                {"text": item.text, "image_paths": list(item.image_paths)} for item in items
            ],
        }
        body = _post_with_retries(f"{self.base_url}/v1/embed", payload, self.config)
        vectors = np.asarray(body["vectors"], dtype=np.float32)
        dim = int(body["dim"])
        if vectors.size == 0:
            vectors = vectors.reshape(0, dim)
        if vectors.shape != (len(items), dim):
            raise ServiceUnavailable(
                f"embedder returned shape {vectors.shape}, expected ({len(items)}, {dim})"
            )
        return vectors


class HttpNerClient:
    """POST /v1/ner {"text"} -> {"spans": [{"start", "end", "label"}]}."""

    def __init__(self, base_url: str, config: HttpConfig | None = None):
        self.base_url = base_url.rstrip("/")
        self.config = config or HttpConfig()

    def spans(self, text: str) -> list[tuple[int, int, str]]:
        body = _post_with_retries(f"{self.base_url}/v1/ner", {"text": text}, self.config)
        return [(int(s["start"]), int(s["end"]), str(s.get("label", ""))) for s in body["spans"]]


class StubEmbedder:
    """Deterministic, injective text embedder for tests and offline runs.

    Each (instruction, text, image_paths) triple seeds an RNG via SHA-256, so
    equal inputs always embed identically and distinct inputs practically
    never collide.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, instruction: str | None, items: Sequence[EmbedRequest]) -> np.ndarray:
        out = np.empty((len(items), self.dim), dtype=np.float32)
        for i, item in enumerate(items):
            key = "\x1f".join([instruction or "", item.text, "|".join(item.image_paths)])
            digest = hashlib.sha256(key.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            out[i] = rng.standard_normal(self.dim, dtype=np.float32)
        return out


def make_embedder(url: str, config: HttpConfig | None = None):
    """Build an embedder from a URL; `stub://<dim>` selects the offline stub."""
    if url.startswith("stub://"):
        spec = url[len("stub://") :]
        return StubEmbedder(dim=int(spec) if spec else 64)
    return HttpEmbedderClient(url, config)
