"""Deterministic synthetic fixtures: forum archives, asset trees, and embedding corpora."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from totr.embedding import EmbeddingMatrix, normalize

VIDEO_URL = "https://videos.example/watch?v={vid}"
MIRROR_URL = "https://mirror.example/v/{i}"


# ---------------------------------------------------------------------------
# Forum archive with hand-assigned labels
# ---------------------------------------------------------------------------


@dataclass
class ArchiveFixture:
    posts: list[dict] = field(default_factory=list)
    comments: list[dict] = field(default_factory=list)
    expected_excluded: dict[str, str] = field(default_factory=dict)
    expected_status: dict[str, str] = field(default_factory=dict)
    expected_evidence: dict[str, set[str]] = field(default_factory=dict)
    expected_links: dict[str, list[str]] = field(default_factory=dict)

    def write(self, directory: Path) -> tuple[Path, Path]:
        directory.mkdir(parents=True, exist_ok=True)
        posts_path = directory / "posts.jsonl"
        comments_path = directory / "comments.jsonl"
        posts_path.write_text(
            "".join(json.dumps(p) + "\n" for p in self.posts), encoding="utf-8"
        )
        comments_path.write_text(
            "".join(json.dumps(c) + "\n" for c in self.comments), encoding="utf-8"
        )
        return posts_path, comments_path


def build_archive(n: int = 200) -> ArchiveFixture:
    """n synthetic posts cycling through ten labeled scenarios.

    The expected status, evidence, and answer links are assigned by the
    generator from the scenario blueprint, independent of the resolver code.
    """
    fx = ArchiveFixture()
    confirmations = ["Solved! thank you so much", "yes! that is the one", "That's it, amazing"]
    for i in range(n):
        scenario = i % 10
        post_id = f"p{i:04d}"
        asker = f"asker{i:03d}"
        vid_link = VIDEO_URL.format(vid=f"vid{i:04d}")
        post = {
            "post_id": post_id,
            "thread": "tipofmytongue",
            "title": f"Looking for a video about topic {i}",
            "body": f"I remember a scene with item {i}. A narrator describes shape {i % 7}.",
            "flair_css": None,
            "author": asker,
            "created_at": 1_600_000_000 + i * 1000,
            "is_nsfw": False,
            "is_bot_author": False,
            "is_deleted": False,
        }
        base_ts = post["created_at"]

        def add_comment(suffix, author, body, parent=None, bot=False, offset=100):
            comment = {
                "comment_id": f"{post_id}c{suffix}",
                "post_id": post_id,
                "parent_id": parent,
                "author": author,
                "body": body,
                "is_moderator_bot": bot,
                "created_at": base_ts + offset,
            }
            fx.comments.append(comment)
            return comment["comment_id"]

        if scenario == 0:
            post["is_nsfw"] = True
            fx.expected_excluded[post_id] = "nsfw"
        elif scenario == 1:
            post["is_deleted"] = True
            fx.expected_excluded[post_id] = "deleted"
        elif scenario == 2:
            post["is_bot_author"] = True
            fx.expected_excluded[post_id] = "bot_author"
        elif scenario == 3:
            # Flair + OP reply confirming a linked comment.
            post["flair_css"] = "flair solved-green"
            answer = add_comment("a", f"helper{i:03d}", f"It is Movie {i}, here: {vid_link}")
            add_comment("b", asker, confirmations[i % 3], parent=answer, offset=200)
            fx.expected_status[post_id] = "solved"
            fx.expected_evidence[post_id] = {"flair_tag", "op_reply"}
            fx.expected_links[post_id] = [vid_link]
        elif scenario == 4:
            # OP reply only; the answer carries two links.
            mirror = MIRROR_URL.format(i=i)
            answer = add_comment(
                "a", f"helper{i:03d}", f"Found it: {vid_link} and also {mirror}"
            )
            add_comment("b", asker, confirmations[i % 3], parent=answer, offset=200)
            fx.expected_status[post_id] = "solved"
            fx.expected_evidence[post_id] = {"op_reply"}
            fx.expected_links[post_id] = [vid_link, mirror]
        elif scenario == 5:
            # Moderator bot copies a helper's answer.
            body = f"The song is Blue Sky {i} by Example Band {vid_link}"
            add_comment("a", f"helper{i:03d}", body)
            add_comment("b", "threadmod", f"Confirmed answer: {body}", bot=True, offset=300)
            fx.expected_status[post_id] = "solved"
            fx.expected_evidence[post_id] = {"mod_bot_confirm"}
            fx.expected_links[post_id] = [vid_link]
        elif scenario == 6:
            # Bot names the answer with a link nobody else posted.
            add_comment("a", f"helper{i:03d}", f"maybe something about item {i}?")
            add_comment("b", "ReferenceBot", f"Marked resolved: {vid_link}", offset=300)
            fx.expected_status[post_id] = "solved"
            fx.expected_evidence[post_id] = {"mod_bot_confirm"}
            fx.expected_links[post_id] = [vid_link]
        elif scenario == 7:
            add_comment("a", f"helper{i:03d}", f"maybe the one with item {i}? not sure")
            add_comment("b", f"helper{i:03d}x", "could be a short film from the 90s", offset=200)
            fx.expected_status[post_id] = "unsolved"
        elif scenario == 8:
            if i % 2 == 1:
                # Flair claims solved but no comment identifies an answer.
                post["flair_css"] = "solved"
            fx.expected_status[post_id] = "unsolved"
        else:
            # OP and the bot back different answers.
            other = MIRROR_URL.format(i=i)
            answer_a = add_comment("a", f"helper{i:03d}", f"This one: {vid_link}")
            add_comment("b", f"helper{i:03d}x", f"No, surely {other}", offset=150)
            add_comment("c", asker, confirmations[i % 3], parent=answer_a, offset=200)
            add_comment("d", "threadmod", f"Marked as answered: {other}", bot=True, offset=300)
            fx.expected_status[post_id] = "conflict"
            fx.expected_evidence[post_id] = {"op_reply", "mod_bot_confirm"}

        fx.posts.append(post)
    return fx


def build_e2e_archive(n: int = 50) -> ArchiveFixture:
    """n posts, every one solved by an OP-confirmed comment linking video i."""
    fx = ArchiveFixture()
    subjects = ["a street musician", "an animated fox", "a cooking contest", "a paper plane",
                "an old arcade", "a lighthouse keeper", "a chess match", "a subway busker"]
    details = ["neon signs", "a thunderstorm", "a red balloon", "stop-motion clay",
               "a whistled melody", "hand-drawn maps", "a ticking clock"]
    for i in range(n):
        post_id = f"p{i:04d}"
        video_id = f"vid{i:04d}"
        asker = f"seeker{i:03d}"
        created = 1_650_000_000 + i * 500
        fx.posts.append(
            {
                "post_id": post_id,
                "thread": "tipofmytongue",
                "title": f"Video with {subjects[i % len(subjects)]} number {i}",
                "body": (
                    f"I remember {subjects[i % len(subjects)]} and {details[i % len(details)]}. "
                    f"There was a shot of item {i} near the end. It felt like clip {i * 13 % 97}."
                ),
                "flair_css": "solved",
                "author": asker,
                "created_at": created,
                "is_nsfw": False,
                "is_bot_author": False,
                "is_deleted": False,
            }
        )
        answer_id = f"{post_id}c1"
        fx.comments.append(
            {
                "comment_id": answer_id,
                "post_id": post_id,
                "parent_id": None,
                "author": f"finder{i:03d}",
                "body": f"This is it: {VIDEO_URL.format(vid=video_id)}",
                "is_moderator_bot": False,
                "created_at": created + 900,
            }
        )
        fx.comments.append(
            {
                "comment_id": f"{post_id}c2",
                "post_id": post_id,
                "parent_id": answer_id,
                "author": asker,
                "body": "Solved! that is the one",
                "is_moderator_bot": False,
                "created_at": created + 1800,
            }
        )
        fx.expected_status[post_id] = "solved"
        fx.expected_links[post_id] = [VIDEO_URL.format(vid=video_id)]
    return fx


# ---------------------------------------------------------------------------
# Asset directory tree
# ---------------------------------------------------------------------------


def write_asset_dir(
    root: Path,
    video_id: str,
    *,
    title: str,
    duration_s: float | None,
    transcript: str,
    ocr_texts: list[str],
    available: bool = True,
    view_count: int | None = None,
) -> Path:
    asset_dir = root / video_id
    scene_dir = asset_dir / "scenes"
    scene_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "video_id": video_id,
        "title": title,
        "duration_s": duration_s,
        "view_count": view_count,
        "upload_date": "2021-06-01",
        "available": available,
    }
    (asset_dir / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
    rows = []
    for index, text in enumerate(ocr_texts):
        color = ((index * 40) % 256, (index * 90) % 256, 120)
        Image.new("RGB", (4, 4), color).save(scene_dir / f"{index:04d}.jpg", "JPEG")
        rows.append({"index": index, "start_s": index * 2.0, "text": text})
    (asset_dir / "ocr.jsonl").write_text(
        "".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8"
    )
    (asset_dir / "transcript.txt").write_text(transcript, encoding="utf-8")
    return asset_dir


def build_assets_tree(root: Path, n: int = 50) -> list[str]:
    """n well-formed video asset dirs, all shorter than the duration cutoff."""
    video_ids = []
    for i in range(n):
        video_id = f"vid{i:04d}"
        ocr = [f"caption {i}-{j // 2}" for j in range(4)]  # consecutive duplicates
        write_asset_dir(
            root,
            video_id,
            title=f"Example video {i}",
            duration_s=30.0 + i,
            transcript=(
                f"A narrator describes shape {i % 7} while item {i} appears on screen. "
                f"Later a tune {i} plays."
            ),
            ocr_texts=ocr,
            view_count=1000 + i * 37,
        )
        video_ids.append(video_id)
    return video_ids


# ---------------------------------------------------------------------------
# Embedding corpora
# ---------------------------------------------------------------------------


def two_cluster_corpus(
    n: int = 200,
    dim: int = 32,
    seed: int = 11,
    alpha: float = 0.5,
    beta: float = 1.0,
    nu: float = 0.5,
) -> tuple[EmbeddingMatrix, EmbeddingMatrix, np.ndarray]:
    """Query/document matrices whose pairing signal hides behind cluster noise.

    Each item carries a unit identifying vector in the first half of the
    dimensions (shared between its query and document) and a strong two-cluster
    distractor with per-item noise in the second half. Cosine search on the raw
    vectors is dominated by the distractor, so pre-training retrieval is poor; a
    linear adapter that suppresses the distractor half makes it near-perfect.
    """
    rng = np.random.default_rng(seed)
    half = dim // 2
    signal = rng.standard_normal((n, half))
    signal /= np.linalg.norm(signal, axis=1, keepdims=True)
    centers = rng.standard_normal((2, half))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers[1] -= centers[0] * (centers[0] @ centers[1])
    centers[1] /= np.linalg.norm(centers[1])
    cluster = np.arange(n) % 2

    def side() -> np.ndarray:
        noise = rng.standard_normal((n, half))
        distractor = beta * (centers[cluster] + nu * noise)
        return np.hstack([alpha * signal, distractor]).astype(np.float32)

    ids = [f"v{i:04d}" for i in range(n)]
    queries = normalize(EmbeddingMatrix(ids=ids, vectors=side()))
    docs = normalize(EmbeddingMatrix(ids=list(ids), vectors=side()))
    return queries, docs, cluster


def random_corpus(n: int, dim: int, seed: int = 0) -> EmbeddingMatrix:
    rng = np.random.default_rng(seed)
    ids = [f"d{i:05d}" for i in range(n)]
    return EmbeddingMatrix(ids=ids, vectors=rng.standard_normal((n, dim)).astype(np.float32))
