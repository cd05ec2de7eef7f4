"""Text-generation scoring (BLEU, ROUGE, embedding F1) and the prompt-ranking harness.

Tokenization everywhere is lowercase + split on non-alphanumerics. BLEU uses
uniform n-gram weights with plain clipped counts and no smoothing; the n-gram
order is capped at the candidate length so identical texts always score 1.0.
"""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .assets import VideoAsset
from .clients import JudgeClient, ServiceUnavailable
from .curation import RecallRecord, SentenceTag, split_sentences
from .embedding import EmbedderClient, EmbedRequest, RequestKind, cosine, embed_batch
from .prompts import prr_prompt

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_OPTION_RE = re.compile(r"(?i)option\s*(\d+)")
_BARE_INT_RE = re.compile(r"^\s*(\d+)\s*$")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class ScoreReport:
    bleu: float
    rouge1: float
    rouge2: float
    rouge_l: float
    embed_f1: float | None = None

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "bleu": self.bleu,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rouge_l": self.rouge_l,
        }
        if self.embed_f1 is not None:
            doc["embed_f1"] = self.embed_f1
        return doc


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Clipped n-gram precision BLEU with brevity penalty, no smoothing."""
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        raise ValueError("candidate must be non-empty")
    if not references:
        raise ValueError("at least one reference is required")
    ref_token_lists = [tokenize(r) for r in references]

    effective_n = min(max_n, len(cand_tokens))
    log_precisions: list[float] = []
    for n in range(1, effective_n + 1):
        cand_counts = _ngrams(cand_tokens, n)
        max_ref_counts: Counter = Counter()
        for ref_tokens in ref_token_lists:
            for gram, count in _ngrams(ref_tokens, n).items():
                max_ref_counts[gram] = max(max_ref_counts[gram], count)
        clipped = sum(min(count, max_ref_counts[g]) for g, count in cand_counts.items())
        total = sum(cand_counts.values())
        if clipped == 0:
            return 0.0
        log_precisions.append(np.log(clipped / total))

    c = len(cand_tokens)
    # Effective reference length: closest to the candidate, shorter on ties.
    r = min((abs(len(t) - c), len(t)) for t in ref_token_lists)[1]
    brevity = 1.0 if c > r else float(np.exp(1.0 - r / c))
    return brevity * float(np.exp(sum(log_precisions) / effective_n))


@dataclass(frozen=True)
class Overlap:
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> Overlap:
    """Clipped n-gram overlap precision/recall/F1."""
    cand_counts = _ngrams(tokenize(candidate), n)
    ref_counts = _ngrams(tokenize(reference), n)
    overlap = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
    cand_total = sum(cand_counts.values())
    ref_total = sum(ref_counts.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return Overlap(precision=precision, recall=recall, f1=_f1(precision, recall))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0] * (len(b) + 1)
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def rouge_l(candidate: str, reference: str) -> Overlap:
    """Longest-common-subsequence precision/recall/F1 over tokens."""
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    lcs = _lcs_length(cand_tokens, ref_tokens)
    precision = lcs / len(cand_tokens) if cand_tokens else 0.0
    recall = lcs / len(ref_tokens) if ref_tokens else 0.0
    return Overlap(precision=precision, recall=recall, f1=_f1(precision, recall))


def embed_f1(candidate: str, reference: str, embedder: EmbedderClient) -> float:
    """Greedy max-cosine token matching in both directions, F1 of the two means.

    This follows the embedding-greedy-match recipe over whatever embedder is
    wired in; negative similarities are clamped so the score stays in [0, 1].
    """
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not cand_tokens or not ref_tokens:
        return 0.0
    unique = sorted(set(cand_tokens) | set(ref_tokens))
    requests = [EmbedRequest(kind=RequestKind.DOCUMENT_TEXT, text=t) for t in unique]
    matrix = embed_batch(requests, embedder)
    vector_by_token = {t: matrix.vectors[i] for i, t in enumerate(unique)}

    sims = np.array(
        [
            [cosine(vector_by_token[ct], vector_by_token[rt]) for rt in ref_tokens]
            for ct in cand_tokens
        ]
    )
    precision = float(np.clip(sims.max(axis=1), 0.0, None).mean())
    recall = float(np.clip(sims.max(axis=0), 0.0, None).mean())
    return _f1(min(precision, 1.0), min(recall, 1.0))


def score_pair(
    candidate: str,
    reference: str,
    embedder: EmbedderClient | None = None,
) -> ScoreReport:
    return ScoreReport(
        bleu=bleu(candidate, [reference]),
        rouge1=rouge_n(candidate, reference, 1).f1,
        rouge2=rouge_n(candidate, reference, 2).f1,
        rouge_l=rouge_l(candidate, reference).f1,
        embed_f1=embed_f1(candidate, reference, embedder) if embedder is not None else None,
    )


# ---------------------------------------------------------------------------
# Prompt recall ranking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrrInstance:
    video_id: str
    candidate_prompts: tuple[str, str, str, str, str]
    gold_index: int

    def __post_init__(self) -> None:
        if len(self.candidate_prompts) != 5:
            raise ValueError(f"{self.video_id}: exactly 5 candidate prompts required")
        if not 0 <= self.gold_index <= 4:
            raise ValueError(f"{self.video_id}: gold_index must be in 0..4")

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "PrrInstance":
        return cls(
            video_id=str(raw["video_id"]),
            candidate_prompts=tuple(str(p) for p in raw["candidate_prompts"]),
            gold_index=int(raw["gold_index"]),
        )


@dataclass
class PrrReport:
    accuracy: float
    n_instances: int
    correct: int
    unparseable: int

    def to_json(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "n_instances": self.n_instances,
            "correct": self.correct,
            "unparseable": self.unparseable,
        }


def parse_prr_answer(reply: str) -> int | None:
    """Chosen option as a 0-based index; accepts "Option n", "option n", or bare n."""
    start, end = reply.find("{"), reply.rfind("}")
    answer: Any = None
    if 0 <= start < end:
        try:
            parsed = json.loads(reply[start : end + 1])
            if isinstance(parsed, dict):
                answer = parsed.get("answer")
        except json.JSONDecodeError:
            answer = None
    if answer is None:
        answer = reply
    text = str(answer)
    match = _OPTION_RE.search(text) or _BARE_INT_RE.match(text)
    if not match:
        return None
    n = int(match.group(1))
    return n - 1 if 1 <= n <= 5 else None


def prr_run(
    instances: Sequence[PrrInstance],
    assets: Mapping[str, VideoAsset],
    judge: JudgeClient,
) -> PrrReport:
    """Ask the judge to pick the matching prompt for each video; report accuracy.

    An unparseable reply gets one retry; if it stays unparseable the instance
    counts as wrong and is tallied separately.
    """
    correct = 0
    unparseable = 0
    for instance in instances:
        asset = assets.get(instance.video_id)
        scene_paths = [s.image_path for s in asset.deduped_scenes()] if asset else []
        prompt = prr_prompt(scene_paths, list(instance.candidate_prompts))
        choice: int | None = None
        for _ in range(2):
            try:
                reply = judge.complete(prompt)
            except ServiceUnavailable:
                break
            choice = parse_prr_answer(reply)
            if choice is not None:
                break
        if choice is None:
            unparseable += 1
            continue
        if choice == instance.gold_index:
            correct += 1
    n = len(instances)
    return PrrReport(
        accuracy=correct / n if n else 0.0,
        n_instances=n,
        correct=correct,
        unparseable=unparseable,
    )


def strip_episodic_for_training(record: RecallRecord) -> str:
    """Recall text with purely episodic sentences removed, order preserved."""
    sentences = split_sentences(record.recall_text)
    kept = [
        sentence
        for sentence, tag in zip(sentences, record.sentence_tags)
        if tag != SentenceTag.EPISODIC
    ]
    return " ".join(kept)
