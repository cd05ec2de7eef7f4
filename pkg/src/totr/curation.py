"""Forum-archive curation: filtering, solved-answer resolution, and record building.

The pipeline turns raw post/comment archives into recall-content pairs. A post
counts as solved only when at least one confirmation signal (flair tag, an
explicit reply from the original poster, or a moderator bot) names an answer,
and the signals agree with each other.
"""
from __future__ import annotations

import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .clients import JudgeClient, ServiceUnavailable
from .jsonl import read_jsonl_lenient
from .prompts import judge_content_prompt

log = logging.getLogger(__name__)

DEFAULT_CONFIRMATION_PHRASES = ("solved", "that's it", "yes!")

_URL_RE = re.compile(r"https?://[^\s\)\]\}>]+")
_MARKDOWN_LINK_RE = re.compile(r"\[[^\]]*\]\(\s*(https?://[^\s\)\]\}>]+)\s*\)")
_TRAILING_PUNCT = ".,;:!?'\""
_WORD_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class SolvedStatus(str, Enum):
    SOLVED = "solved"
    UNSOLVED = "unsolved"
    CONFLICT = "conflict"


class Evidence(str, Enum):
    FLAIR_TAG = "flair_tag"
    OP_REPLY = "op_reply"
    MOD_BOT_CONFIRM = "mod_bot_confirm"
    JUDGE_CONFIRM = "judge_confirm"


class SentenceTag(str, Enum):
    CONTENT_SEMANTIC = "content_semantic"
    CONTENT_NON_SEMANTIC = "content_non_semantic"
    EPISODIC = "episodic"
    OTHER = "other"


@dataclass(frozen=True)
class RawPost:
    post_id: str
    thread: str
    title: str
    body: str
    author: str
    created_at: int
    flair_css: str | None = None
    is_nsfw: bool = False
    is_bot_author: bool = False
    is_deleted: bool = False

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "RawPost":
        post_id = str(raw.get("post_id") or "").strip()
        if not post_id:
            raise ValueError("post missing post_id")
        created_at = int(raw.get("created_at") or 0)
        if created_at <= 0:
            raise ValueError(f"post {post_id}: created_at must be > 0")
        flair = raw.get("flair_css")
        return cls(
            post_id=post_id,
            thread=str(raw.get("thread") or ""),
            title=str(raw.get("title") or ""),
            body=str(raw.get("body") or ""),
            author=str(raw.get("author") or ""),
            created_at=created_at,
            flair_css=str(flair) if flair is not None else None,
            is_nsfw=bool(raw.get("is_nsfw", False)),
            is_bot_author=bool(raw.get("is_bot_author", False)),
            is_deleted=bool(raw.get("is_deleted", False)),
        )

    @property
    def query_text(self) -> str:
        parts = [part for part in (self.title.strip(), self.body.strip()) if part]
        return "\n\n".join(parts)


@dataclass(frozen=True)
class RawComment:
    comment_id: str
    post_id: str
    author: str
    body: str
    created_at: int
    parent_id: str | None = None
    is_moderator_bot: bool = False

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "RawComment":
        comment_id = str(raw.get("comment_id") or "").strip()
        post_id = str(raw.get("post_id") or "").strip()
        if not comment_id or not post_id:
            raise ValueError("comment missing comment_id or post_id")
        parent = raw.get("parent_id")
        return cls(
            comment_id=comment_id,
            post_id=post_id,
            author=str(raw.get("author") or ""),
            body=str(raw.get("body") or ""),
            created_at=int(raw.get("created_at") or 0),
            parent_id=str(parent) if parent else None,
            is_moderator_bot=bool(raw.get("is_moderator_bot", False)),
        )


@dataclass(frozen=True)
class SolvedResolution:
    post_id: str
    status: SolvedStatus
    answer_text: str = ""
    answer_links: tuple[str, ...] = ()
    evidence: frozenset[Evidence] = frozenset()
    solving_comment_id: str | None = None
    solved_at: int | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "post_id": self.post_id,
            "status": self.status.value,
            "answer_text": self.answer_text,
            "answer_links": list(self.answer_links),
            "evidence": sorted(e.value for e in self.evidence),
            "solving_comment_id": self.solving_comment_id,
            "solved_at": self.solved_at,
        }


@dataclass(frozen=True)
class JudgeVerdict:
    content_name: str
    category: str
    genre: str
    objects: str
    emotions: str
    agrees_with_rule: bool


@dataclass(frozen=True)
class RecallRecord:
    record_id: str
    recall_text: str
    answer_text: str
    answer_links: tuple[str, ...]
    sentence_tags: tuple[SentenceTag, ...]
    category: str | None = None
    genre: str | None = None
    solved_latency_s: int | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "recall_text": self.recall_text,
            "answer_text": self.answer_text,
            "answer_links": list(self.answer_links),
            "sentence_tags": [t.value for t in self.sentence_tags],
            "category": self.category,
            "genre": self.genre,
            "solved_latency_s": self.solved_latency_s,
        }

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> "RecallRecord":
        return cls(
            record_id=str(raw["record_id"]),
            recall_text=str(raw["recall_text"]),
            answer_text=str(raw.get("answer_text") or ""),
            answer_links=tuple(raw.get("answer_links") or ()),
            sentence_tags=tuple(SentenceTag(t) for t in raw.get("sentence_tags") or ()),
            category=raw.get("category"),
            genre=raw.get("genre"),
            solved_latency_s=raw.get("solved_latency_s"),
        )


@dataclass
class FilterReport:
    nsfw: int = 0
    bot_author: int = 0
    deleted: int = 0
    malformed: int = 0

    @property
    def excluded(self) -> int:
        return self.nsfw + self.bot_author + self.deleted

    def to_json(self) -> dict[str, int]:
        return {
            "nsfw": self.nsfw,
            "bot_author": self.bot_author,
            "deleted": self.deleted,
            "malformed": self.malformed,
        }


@dataclass
class CorpusStats:
    """Funnel counts: total -> post-filter -> solved -> records."""

    total_posts: int = 0
    filtered_posts: int = 0
    solved: int = 0
    unsolved: int = 0
    conflict: int = 0
    records: int = 0
    filter_report: FilterReport = field(default_factory=FilterReport)
    dangling_comments: int = 0
    skipped_dangling: int = 0
    flair_without_answer: int = 0
    judge_agreements: int = 0
    judge_disagreements: int = 0
    judge_absent: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "total_posts": self.total_posts,
            "filtered_posts": self.filtered_posts,
            "solved": self.solved,
            "unsolved": self.unsolved,
            "conflict": self.conflict,
            "records": self.records,
            "excluded": self.filter_report.to_json(),
            "dangling_comments": self.dangling_comments,
            "skipped_dangling": self.skipped_dangling,
            "flair_without_answer": self.flair_without_answer,
            "judge": {
                "agreements": self.judge_agreements,
                "disagreements": self.judge_disagreements,
                "absent": self.judge_absent,
            },
        }


# ---------------------------------------------------------------------------
# Archive loading
# ---------------------------------------------------------------------------


def load_posts(path: str | Path, report: FilterReport | None = None) -> list[RawPost]:
    """Parse posts.jsonl; malformed lines are counted and skipped, never fatal."""
    posts: list[RawPost] = []
    seen: set[str] = set()
    for raw, line_number in read_jsonl_lenient(path):
        if raw is None:
            if report is not None:
                report.malformed += 1
            log.warning("%s:%d: malformed post line skipped", path, line_number)
            continue
        try:
            post = RawPost.from_json(raw)
        except (ValueError, TypeError) as err:
            if report is not None:
                report.malformed += 1
            log.warning("%s:%d: %s", path, line_number, err)
            continue
        if post.post_id in seen:
            if report is not None:
                report.malformed += 1
            log.warning("%s:%d: duplicate post_id %s skipped", path, line_number, post.post_id)
            continue
        seen.add(post.post_id)
        posts.append(post)
    return posts


def load_comments(path: str | Path, report: FilterReport | None = None) -> list[RawComment]:
    comments: list[RawComment] = []
    for raw, line_number in read_jsonl_lenient(path):
        if raw is None:
            if report is not None:
                report.malformed += 1
            log.warning("%s:%d: malformed comment line skipped", path, line_number)
            continue
        try:
            comments.append(RawComment.from_json(raw))
        except (ValueError, TypeError) as err:
            if report is not None:
                report.malformed += 1
            log.warning("%s:%d: %s", path, line_number, err)
    return comments


def group_comments(comments: Iterable[RawComment]) -> dict[str, list[RawComment]]:
    grouped: dict[str, list[RawComment]] = defaultdict(list)
    for comment in comments:
        grouped[comment.post_id].append(comment)
    for rows in grouped.values():
        rows.sort(key=lambda c: (c.created_at, c.comment_id))
    return dict(grouped)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def filter_posts(
    posts: Iterable[RawPost], report: FilterReport | None = None
) -> Iterator[RawPost]:
    """Drop NSFW, bot-authored, and deleted posts, preserving input order.

    A post matching several exclusion reasons is counted once, under the first
    of nsfw > bot_author > deleted.
    """
    for post in posts:
        if post.is_nsfw:
            if report is not None:
                report.nsfw += 1
            continue
        if post.is_bot_author:
            if report is not None:
                report.bot_author += 1
            continue
        if post.is_deleted:
            if report is not None:
                report.deleted += 1
            continue
        yield post


def extract_links(body: str) -> list[str]:
    """All http(s) URLs in order of appearance, first occurrence kept on duplicates.

    Markdown link syntax is unwrapped first; a URL runs until whitespace or a
    closing bracket, and common trailing punctuation is stripped.
    """
    unwrapped = _MARKDOWN_LINK_RE.sub(lambda m: " " + m.group(1) + " ", body)
    links: list[str] = []
    seen: set[str] = set()
    for match in _URL_RE.finditer(unwrapped):
        url = match.group(0).rstrip(_TRAILING_PUNCT)
        if url and url not in seen:
            seen.add(url)
            links.append(url)
    return links


def _normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def _has_solved_flair(flair_css: str | None) -> bool:
    if not flair_css:
        return False
    return "solved" in _WORD_RE.findall(flair_css.lower())


def _is_moderator_bot(comment: RawComment) -> bool:
    # Archive flag when present, otherwise the author-name "…bot" convention.
    return comment.is_moderator_bot or comment.author.lower().endswith("bot")


def _find_op_confirmed(
    post: RawPost,
    comments: Sequence[RawComment],
    phrases: Sequence[str],
) -> RawComment | None:
    """Earliest comment the post author confirmed by replying with a phrase."""
    by_id = {c.comment_id: c for c in comments}
    lowered = [p.lower() for p in phrases]
    hits: list[RawComment] = []
    for comment in comments:
        if comment.author != post.author or not comment.parent_id:
            continue
        body = comment.body.lower()
        if not any(phrase in body for phrase in lowered):
            continue
        parent = by_id.get(comment.parent_id)
        if parent is not None:
            hits.append(parent)
    if not hits:
        return None
    return min(hits, key=lambda c: (c.created_at, c.comment_id))


def _find_bot_confirmed(
    comments: Sequence[RawComment],
) -> tuple[RawComment, RawComment] | None:
    """(named answer comment, bot comment) for the earliest bot that names one.

    A bot names an answer either by sharing a link with a non-bot comment, by
    copying a non-bot comment's text, or by carrying links itself.
    """
    non_bot = [c for c in comments if not _is_moderator_bot(c)]
    for bot in comments:
        if not _is_moderator_bot(bot):
            continue
        bot_links = set(extract_links(bot.body))
        if bot_links:
            for candidate in non_bot:
                if bot_links & set(extract_links(candidate.body)):
                    return candidate, bot
            return bot, bot
        bot_text = _normalize_text(bot.body)
        if not bot_text:
            continue
        for candidate in non_bot:
            candidate_text = _normalize_text(candidate.body)
            if candidate_text and (candidate_text in bot_text or bot_text in candidate_text):
                return candidate, bot
    return None


def _answers_consistent(a: RawComment, b: RawComment) -> bool:
    if a.comment_id == b.comment_id:
        return True
    links_a, links_b = set(extract_links(a.body)), set(extract_links(b.body))
    if links_a and links_b:
        return bool(links_a & links_b)
    text_a, text_b = _normalize_text(a.body), _normalize_text(b.body)
    if text_a and text_b:
        return text_a in text_b or text_b in text_a
    return False


def resolve_solved(
    post: RawPost,
    comments: Sequence[RawComment],
    *,
    confirmation_phrases: Sequence[str] = DEFAULT_CONFIRMATION_PHRASES,
    prefer_op_reply: bool = False,
) -> SolvedResolution:
    """Resolve a post's solved status from flair, OP replies, and moderator bots.

    Pure function of (post, comments): repeated calls return identical values.
    An empty comment list resolves to unsolved. A solved flair with no
    identifiable solving comment also resolves to unsolved (with empty
    evidence), since no answer can be extracted.
    """
    for comment in comments:
        if comment.post_id != post.post_id:
            raise ValueError(
                f"comment {comment.comment_id} belongs to {comment.post_id}, not {post.post_id}"
            )
    comments = sorted(comments, key=lambda c: (c.created_at, c.comment_id))
    flair = _has_solved_flair(post.flair_css)
    op_solving = _find_op_confirmed(post, comments, confirmation_phrases)
    bot_hit = _find_bot_confirmed(comments)

    evidence: set[Evidence] = set()
    if flair:
        evidence.add(Evidence.FLAIR_TAG)

    solving: RawComment | None = None
    if op_solving is not None and bot_hit is not None:
        bot_named, _bot = bot_hit
        if _answers_consistent(op_solving, bot_named):
            evidence |= {Evidence.OP_REPLY, Evidence.MOD_BOT_CONFIRM}
            solving = op_solving
        elif prefer_op_reply:
            evidence.add(Evidence.OP_REPLY)
            solving = op_solving
        else:
            evidence |= {Evidence.OP_REPLY, Evidence.MOD_BOT_CONFIRM}
            return SolvedResolution(
                post_id=post.post_id,
                status=SolvedStatus.CONFLICT,
                evidence=frozenset(evidence),
            )
    elif op_solving is not None:
        evidence.add(Evidence.OP_REPLY)
        solving = op_solving
    elif bot_hit is not None:
        evidence.add(Evidence.MOD_BOT_CONFIRM)
        solving = bot_hit[0]

    if solving is None or not solving.body.strip():
        # Flair alone never identifies the answer; emit unsolved, not a guess.
        return SolvedResolution(post_id=post.post_id, status=SolvedStatus.UNSOLVED)

    return SolvedResolution(
        post_id=post.post_id,
        status=SolvedStatus.SOLVED,
        answer_text=solving.body,
        answer_links=tuple(extract_links(solving.body)),
        evidence=frozenset(evidence),
        solving_comment_id=solving.comment_id,
        solved_at=solving.created_at,
    )


def _parse_json_reply(text: str) -> dict[str, Any] | None:
    """Pull the first JSON object out of a judge reply, tolerating wrapper prose."""
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        obj = json.loads(text[start : end + 1])
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


def _judge_agrees(content_name: str, resolution: SolvedResolution) -> bool:
    """Normalized-substring or link-equality match between judge and rule answers."""
    judge_links = set(extract_links(content_name))
    if judge_links & set(resolution.answer_links):
        return True
    judge_text = _normalize_text(content_name)
    rule_text = _normalize_text(resolution.answer_text)
    if judge_text and rule_text:
        return judge_text in rule_text or rule_text in judge_text
    return False


def judge_validate(
    post: RawPost,
    comments: Sequence[RawComment],
    judge: JudgeClient,
    resolution: SolvedResolution,
) -> JudgeVerdict | None:
    """Cross-check the rule-based answer with the external judge service.

    Returns None (verdict absent) when the judge is unreachable or replies with
    unparseable JSON twice. On disagreement the rule-based answer is retained;
    the verdict only records that the judge differed.
    """
    post_text = post.query_text
    thread = "\n".join(f"{c.author}: {c.body}" for c in comments)
    answer = resolution.answer_text or ", ".join(resolution.answer_links)
    prompt = judge_content_prompt(f"{post_text}\n{thread}", answer)

    parsed: dict[str, Any] | None = None
    for _ in range(2):  # one retry on unparseable output
        try:
            reply = judge.complete(prompt)
        except ServiceUnavailable:
            return None
        parsed = _parse_json_reply(reply)
        if parsed is not None:
            break
    if parsed is None:
        return None

    content_name = str(parsed.get("content name") or parsed.get("content_name") or "")
    return JudgeVerdict(
        content_name=content_name,
        category=str(parsed.get("category") or ""),
        genre=str(parsed.get("genre") or ""),
        objects=str(parsed.get("objects") or ""),
        emotions=str(parsed.get("emotions") or ""),
        agrees_with_rule=_judge_agrees(content_name, resolution),
    )


# ---------------------------------------------------------------------------
# Sentence tagging
# ---------------------------------------------------------------------------

_FIRST_SECOND_PERSON = {
    "i", "i'm", "i've", "i'd", "me", "my", "mine", "we", "we're", "we've",
    "us", "our", "ours", "you", "you're", "your", "yours",
}
_PAST_CUES = {
    "was", "were", "had", "did", "went", "saw", "got", "came", "made", "ago",
    "used", "grew", "heard", "found", "told", "kept", "left", "thought",
}

_TAG_PROMPT = (
    "Classify each numbered sentence from a content-recall post into exactly one "
    "of: content_semantic, content_non_semantic, episodic, other. Reply strictly "
    'as JSON: {"tags": ["<tag>", ...]} with one tag per sentence, in order.\n'
)


def split_sentences(text: str) -> list[str]:
    """Deterministic splitter: terminal punctuation followed by whitespace."""
    stripped = text.strip()
    if not stripped:
        return []
    return [part for part in _SENTENCE_SPLIT_RE.split(stripped) if part.strip()]


def _heuristic_tag(sentence: str) -> SentenceTag:
    words = _WORD_RE.findall(sentence.lower())
    personal = any(w in _FIRST_SECOND_PERSON for w in words)
    past = any(w in _PAST_CUES or (w.endswith("ed") and len(w) > 3) for w in words)
    if personal and past:
        return SentenceTag.EPISODIC
    return SentenceTag.CONTENT_NON_SEMANTIC


def tag_sentences(
    recall_text: str, tagger: JudgeClient | None = None
) -> tuple[SentenceTag, ...]:
    """Tag each sentence; uses the judge when given, else the pronoun+past heuristic."""
    sentences = split_sentences(recall_text)
    if not sentences:
        return ()
    if tagger is not None:
        numbered = "\n".join(f"{i + 1}. {s}" for i, s in enumerate(sentences))
        try:
            reply = tagger.complete(_TAG_PROMPT + numbered)
        except ServiceUnavailable:
            reply = ""
        parsed = _parse_json_reply(reply)
        if parsed is not None:
            raw_tags = parsed.get("tags")
            if isinstance(raw_tags, list) and len(raw_tags) == len(sentences):
                try:
                    return tuple(SentenceTag(str(t)) for t in raw_tags)
                except ValueError:
                    pass
        log.warning("sentence tagger reply unusable; falling back to heuristic")
    return tuple(_heuristic_tag(s) for s in sentences)


def strip_episodic(recall_text: str, tags: Sequence[SentenceTag]) -> str:
    """Drop episodic sentences; the survivors keep their original order."""
    sentences = split_sentences(recall_text)
    kept = [s for s, t in zip(sentences, tags) if t != SentenceTag.EPISODIC]
    return " ".join(kept)


# ---------------------------------------------------------------------------
# Record building
# ---------------------------------------------------------------------------


def build_records(
    posts: Sequence[RawPost],
    comments_by_post: Mapping[str, list[RawComment]],
    resolutions: Mapping[str, SolvedResolution],
    *,
    verdicts: Mapping[str, JudgeVerdict | None] | None = None,
    tagger: JudgeClient | None = None,
    stats: CorpusStats | None = None,
) -> list[RecallRecord]:
    """One RecallRecord per solved post, sorted by post id for determinism."""
    stats = stats if stats is not None else CorpusStats()
    post_ids = {p.post_id for p in posts}
    for post_id in comments_by_post:
        if post_id not in post_ids:
            stats.dangling_comments += len(comments_by_post[post_id])

    records: list[RecallRecord] = []
    for post in sorted(posts, key=lambda p: p.post_id):
        resolution = resolutions.get(post.post_id)
        if resolution is None:
            stats.skipped_dangling += 1
            continue
        if resolution.status is SolvedStatus.CONFLICT:
            stats.conflict += 1
            continue
        if resolution.status is SolvedStatus.UNSOLVED:
            stats.unsolved += 1
            if _has_solved_flair(post.flair_css):
                stats.flair_without_answer += 1
            continue
        stats.solved += 1

        category = genre = None
        verdict = (verdicts or {}).get(post.post_id)
        if verdict is not None:
            if verdict.agrees_with_rule:
                stats.judge_agreements += 1
            else:
                stats.judge_disagreements += 1
            category = verdict.category or None
            genre = verdict.genre or None
        elif verdicts is not None and post.post_id in verdicts:
            stats.judge_absent += 1

        recall_text = post.query_text
        if not recall_text:
            stats.skipped_dangling += 1
            continue
        latency: int | None = None
        if resolution.solved_at is not None:
            delta = resolution.solved_at - post.created_at
            latency = delta if delta >= 0 else None

        records.append(
            RecallRecord(
                record_id=post.post_id,
                recall_text=recall_text,
                answer_text=resolution.answer_text,
                answer_links=resolution.answer_links,
                sentence_tags=tag_sentences(recall_text, tagger),
                category=category,
                genre=genre,
                solved_latency_s=latency,
            )
        )
    stats.records = len(records)
    return records


def curate(
    posts_path: str | Path,
    comments_path: str | Path,
    *,
    judge: JudgeClient | None = None,
    tagger: JudgeClient | None = None,
    confirmation_phrases: Sequence[str] = DEFAULT_CONFIRMATION_PHRASES,
    prefer_op_reply: bool = False,
) -> tuple[list[RecallRecord], CorpusStats, dict[str, SolvedResolution]]:
    """Full curation pass: load, filter, resolve, validate, and build records."""
    stats = CorpusStats()
    posts = load_posts(posts_path, stats.filter_report)
    stats.total_posts = len(posts) + stats.filter_report.malformed
    comments_by_post = group_comments(load_comments(comments_path, stats.filter_report))

    kept = list(filter_posts(posts, stats.filter_report))
    stats.filtered_posts = len(kept)

    resolutions: dict[str, SolvedResolution] = {}
    verdicts: dict[str, JudgeVerdict | None] = {}
    for post in kept:
        resolution = resolve_solved(
            post,
            comments_by_post.get(post.post_id, []),
            confirmation_phrases=confirmation_phrases,
            prefer_op_reply=prefer_op_reply,
        )
        if judge is not None and resolution.status is SolvedStatus.SOLVED:
            verdict = judge_validate(
                post, comments_by_post.get(post.post_id, []), judge, resolution
            )
            verdicts[post.post_id] = verdict
            if verdict is not None and verdict.agrees_with_rule:
                resolution = SolvedResolution(
                    post_id=resolution.post_id,
                    status=resolution.status,
                    answer_text=resolution.answer_text,
                    answer_links=resolution.answer_links,
                    evidence=resolution.evidence | {Evidence.JUDGE_CONFIRM},
                    solving_comment_id=resolution.solving_comment_id,
                    solved_at=resolution.solved_at,
                )
        resolutions[post.post_id] = resolution

    records = build_records(
        kept,
        comments_by_post,
        resolutions,
        verdicts=verdicts if judge is not None else None,
        tagger=tagger,
        stats=stats,
    )
    return records, stats, resolutions
