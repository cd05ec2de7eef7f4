"""Retrieval evaluation: Recall@k and MRR@k over the three document-set setups.

A query's gold rank is the best rank among all of its gold documents, so a
post with several correct links counts as a hit as soon as any of them is
retrieved. Queries whose gold documents are absent from the corpus are
excluded and counted rather than silently scored zero.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

from .contrastive import AdapterState, apply_adapter
from .embedding import EmbeddingMatrix, load_matrix, normalize, rank_all

log = logging.getLogger(__name__)

DEFAULT_K_VALUES = (1, 10, 100)


class EvalSetup(str, Enum):
    TOPLINE_IDENTITY = "topline_identity"
    GENERATED_RECALL_PROXY = "generated_recall_proxy"
    VIDEO_DOCUMENTS = "video_documents"


@dataclass(frozen=True)
class EvalConfig:
    name: EvalSetup
    query_source: str
    doc_source: str
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    adapter: str | None = None
    gold_source: str | None = None  # jsonl {query_id, gold_ids}; default: same id

    def __post_init__(self) -> None:
        if not self.k_values:
            raise ValueError("k_values must be non-empty")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k values must be positive")
        if list(self.k_values) != sorted(set(self.k_values)):
            raise ValueError("k values must be strictly increasing")

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "EvalConfig":
        return cls(
            name=EvalSetup(raw["name"]),
            query_source=str(raw["query_source"]),
            doc_source=str(raw["doc_source"]),
            k_values=tuple(int(k) for k in raw.get("k_values") or DEFAULT_K_VALUES),
            adapter=raw.get("adapter"),
            gold_source=raw.get("gold_source"),
        )


@dataclass
class EvalResult:
    recall: dict[int, float]
    mrr: dict[int, float]
    n_queries: int
    ranks: dict[str, int | None]  # None = gold beyond max k
    excluded_no_gold: int = 0
    manifest: dict[str, Any] = field(default_factory=dict)

    def table(self) -> dict[str, str]:
        """Per-k "recall/mrr" strings, percent-scaled like the familiar layout."""
        return {
            f"@{k}": f"{100 * self.recall[k]:.1f}/{100 * self.mrr[k]:.1f}"
            for k in sorted(self.recall)
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "recall": {str(k): v for k, v in self.recall.items()},
            "mrr": {str(k): v for k, v in self.mrr.items()},
            "table": self.table(),
            "n_queries": self.n_queries,
            "excluded_no_gold": self.excluded_no_gold,
            "ranks": self.ranks,
            "manifest": self.manifest,
        }


def recall_at_k(ranks: Sequence[int | None], k: int) -> float:
    """Fraction of queries whose gold rank is within the top k."""
    if not ranks:
        return 0.0
    hits = sum(1 for rank in ranks if rank is not None and rank <= k)
    return hits / len(ranks)


def mrr_at_k(ranks: Sequence[int | None], k: int) -> float:
    """Mean reciprocal rank, zeroing queries whose gold falls outside the top k."""
    if not ranks:
        return 0.0
    total = sum(1.0 / rank for rank in ranks if rank is not None and rank <= k)
    return total / len(ranks)


def gold_rank(ranking: Sequence[tuple[str, float]], gold_ids: set[str]) -> int | None:
    """1-based rank of the best gold document, None when absent from the ranking."""
    for position, (doc_id, _score) in enumerate(ranking, start=1):
        if doc_id in gold_ids:
            return position
    return None


def evaluate_rankings(
    queries: EmbeddingMatrix,
    docs: EmbeddingMatrix,
    golds: Mapping[str, set[str]],
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> EvalResult:
    """Score every query with gold documents present in the corpus."""
    doc_ids = set(docs.ids)
    max_k = max(k_values)
    ranks: dict[str, int | None] = {}
    excluded = 0
    for i, query_id in enumerate(queries.ids):
        gold = golds.get(query_id, set())
        present = gold & doc_ids
        if not present:
            excluded += 1
            continue
        ranking = rank_all(docs, queries.vectors[i])
        rank = gold_rank(ranking, present)
        ranks[query_id] = rank if rank is not None and rank <= max_k else None

    rank_list = list(ranks.values())
    result = EvalResult(
        recall={k: recall_at_k(rank_list, k) for k in k_values},
        mrr={k: mrr_at_k(rank_list, k) for k in k_values},
        n_queries=len(rank_list),
        ranks=ranks,
        excluded_no_gold=excluded,
    )
    if excluded:
        log.warning("%d queries had no gold document in the corpus", excluded)
    return result


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_golds(path: str | Path) -> dict[str, set[str]]:
    golds: dict[str, set[str]] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                row = json.loads(line)
                golds[str(row["query_id"])] = {str(g) for g in row["gold_ids"]}
    return golds


def run_eval(config: EvalConfig, seed: int = 0) -> EvalResult:
    """Load stores, apply the adapter to both sides when present, and score."""
    queries = normalize(load_matrix(config.query_source))
    docs = normalize(load_matrix(config.doc_source))

    adapter_hash = None
    if config.adapter:
        adapter = AdapterState.load(config.adapter)
        queries = apply_adapter(adapter, queries)
        docs = apply_adapter(adapter, docs)
        adapter_hash = _file_sha256(config.adapter)

    if config.gold_source:
        golds = load_golds(config.gold_source)
    else:
        golds = {query_id: {query_id} for query_id in queries.ids}

    result = evaluate_rankings(queries, docs, golds, config.k_values)
    config_doc = {
        "name": config.name.value,
        "query_source": config.query_source,
        "doc_source": config.doc_source,
        "k_values": list(config.k_values),
        "adapter": config.adapter,
        "gold_source": config.gold_source,
    }
    result.manifest = {
        "config": config_doc,
        "config_hash": hashlib.sha256(
            json.dumps(config_doc, sort_keys=True).encode("utf-8")
        ).hexdigest(),
        "query_corpus_hash": _file_sha256(config.query_source),
        "doc_corpus_hash": _file_sha256(config.doc_source),
        "adapter_hash": adapter_hash,
        "seed": seed,
        "n_docs": len(docs),
    }
    return result
