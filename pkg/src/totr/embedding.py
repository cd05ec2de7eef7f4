"""Shared vector space: embedding matrices, exact cosine k-NN, and the on-disk store.

Search is deliberately brute force. Corpora here stay at desk scale (<=1e5
rows), where an exact scan is cheap and keeps evaluation trustworthy.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

MAGIC = b"T2ME"


class EmbeddingError(Exception):
    """Base class for vector-space failures."""


class DimMismatch(EmbeddingError):
    """Vectors of different dimensionality were mixed."""


class ZeroVector(EmbeddingError):
    """A zero row cannot be normalized or scored with cosine."""


class EmptyIndex(EmbeddingError):
    """Search was attempted against an index with no rows."""


class RequestKind(str, Enum):
    QUERY_TEXT = "query_text"
    DOCUMENT_TEXT = "document_text"
    VIDEO_DOCUMENT = "video_document"


@dataclass(frozen=True)
class EmbedRequest:
    """One item to embed: plain text, or a video document (text block + scene images)."""

    kind: RequestKind
    text: str
    image_paths: tuple[str, ...] = ()
    instruction: str | None = None


class EmbedderClient(Protocol):
    """Anything that maps a batch of items to a (n, dim) float array."""

    def embed(self, instruction: str | None, items: Sequence[EmbedRequest]) -> np.ndarray: ...


@dataclass
class EmbeddingMatrix:
    """Row-major (count x dim) float32 vectors with a parallel id list."""

    ids: list[str]
    vectors: np.ndarray
    normalized: bool = False
    _row_by_id: dict[str, int] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2:
            raise EmbeddingError(f"expected a 2-d matrix, got shape {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise EmbeddingError(
                f"id count {len(self.ids)} != row count {self.vectors.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingError("duplicate document ids in matrix")
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self._row_by_id = {doc_id: i for i, doc_id in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, doc_id: str) -> np.ndarray:
        return self.vectors[self._row_by_id[doc_id]]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row_by_id


def embed_batch(
    requests: Sequence[EmbedRequest],
    embedder: EmbedderClient,
    *,
    instruction: str | None = None,
    batch_size: int = 32,
) -> EmbeddingMatrix:
    """Embed requests in order; row i corresponds to request i.

    Batching is transparent: any batch size yields the same matrix. Vectors are
    returned exactly as the embedder produced them (unnormalized). Request ids
    are positional ("0", "1", ...); callers re-attach their own ids.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    chunks: list[np.ndarray] = []
    dim: int | None = None
    for start in range(0, len(requests), batch_size):
        batch = requests[start : start + batch_size]
        vectors = np.asarray(embedder.embed(instruction, batch), dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[0] != len(batch):
            raise EmbeddingError(
                f"embedder returned shape {vectors.shape} for a batch of {len(batch)}"
            )
        if dim is None:
            dim = int(vectors.shape[1])
        elif int(vectors.shape[1]) != dim:
            raise DimMismatch(f"batch dim {vectors.shape[1]} != session dim {dim}")
        chunks.append(vectors)
    if not chunks:
        return EmbeddingMatrix(ids=[], vectors=np.zeros((0, 0), dtype=np.float32))
    stacked = np.vstack(chunks)
    return EmbeddingMatrix(ids=[str(i) for i in range(len(stacked))], vectors=stacked)


def normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Return a copy with every row scaled to unit L2 norm."""
    if matrix.normalized:
        return matrix
    norms = np.linalg.norm(matrix.vectors, axis=1)
    zero_rows = np.where(norms == 0.0)[0]
    if zero_rows.size:
        raise ZeroVector(f"zero vector at row id {matrix.ids[int(zero_rows[0])]}")
    vectors = matrix.vectors / norms[:, None]
    return EmbeddingMatrix(ids=list(matrix.ids), vectors=vectors, normalized=True)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity clamped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimMismatch(f"dims differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


def knn_search(index: EmbeddingMatrix, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact top-k by cosine, descending; ties broken by ascending id.

    k larger than the corpus returns the full corpus ranked.
    """
    if len(index) == 0:
        raise EmptyIndex("cannot search an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.normalized:
        raise EmbeddingError("index must be normalized before search")
    query = np.asarray(query, dtype=np.float64).ravel()
    if query.shape[0] != index.dim:
        raise DimMismatch(f"query dim {query.shape[0]} != index dim {index.dim}")
    norm = float(np.linalg.norm(query))
    if norm == 0.0:
        raise ZeroVector("cannot search with a zero query vector")
    # Score in float64: stable rankings regardless of accumulation order.
    scores = index.vectors.astype(np.float64) @ (query / norm)
    np.clip(scores, -1.0, 1.0, out=scores)
    k = min(k, len(index))
    # Stable total order: score descending, then id ascending.
    order = sorted(range(len(index)), key=lambda i: (-float(scores[i]), index.ids[i]))
    return [(index.ids[i], float(scores[i])) for i in order[:k]]


def rank_all(index: EmbeddingMatrix, query: np.ndarray) -> list[tuple[str, float]]:
    """Full corpus ranking (knn_search with k = corpus size)."""
    return knn_search(index, query, len(index))


def save_matrix(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary store: magic, u32 dim, u64 count, f32 rows, newline-delimited ids."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count, dim = matrix.vectors.shape
    with path.open("wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", dim))
        handle.write(struct.pack("<Q", count))
        handle.write(np.ascontiguousarray(matrix.vectors, dtype="<f4").tobytes())
        for doc_id in matrix.ids:
            handle.write(doc_id.encode("utf-8") + b"\n")


def load_matrix(path: str | Path) -> EmbeddingMatrix:
    """Read the binary store, validating magic bytes and section sizes."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise EmbeddingError(f"{path}: missing {MAGIC!r} magic bytes")
    dim = struct.unpack_from("<I", data, 4)[0]
    count = struct.unpack_from("<Q", data, 8)[0]
    vec_bytes = count * dim * 4
    if len(data) < 16 + vec_bytes:
        raise EmbeddingError(f"{path}: truncated vector section")
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=16)
    vectors = vectors.reshape(count, dim).copy()
    id_blob = data[16 + vec_bytes :]
    ids = id_blob.decode("utf-8").splitlines()
    if len(ids) != count:
        raise EmbeddingError(f"{path}: expected {count} ids, found {len(ids)}")
    return EmbeddingMatrix(ids=ids, vectors=vectors)
