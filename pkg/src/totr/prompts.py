"""Instruction templates sent to the judge and embedder services.

These strings are part of the wire contract: downstream services key on their
exact wording, so edit with care and bump configs rather than rephrasing.
"""
from __future__ import annotations

JUDGE_CONTENT_PROMPT = (
    "You will be given an online post, where a user asks about some content that "
    "they are trying to remember, but can only provide currently a vague description "
    "of, from their memory. You will also be provided with the response that is given "
    "to the user, which contains the name, or link of the correct content item that "
    "the user is trying to find about. Your task is, given this conversation, to "
    "respond clearly with the name (or link) and type of the content item that the "
    "user is asking about. You are required to answer strictly in a JSON format, as "
    'follows: {"content name": "name of the content item and the link to it, if '
    'present", "category": "could be movie, book, youtube video, game, song, quote, '
    'or anything", "genre": "could be anything among comedy, drama, horror, fantasy, '
    'adventure, or not applicable", "objects": "standard object categories", '
    '"emotions": "any common emotions that maybe present"}. Answer strictly in the '
    "JSON format, with the correct content item name, and category for the following "
    "user post and reply: "
)

PRR_INSTRUCTION = (
    "You will be given multiple images, which are scenes from a video. The images "
    "are about some brand, depicting a brand advertisement. There are also several "
    "potential descriptions available for the sequence of images, which highlight "
    "what is most memorable from the video. Your task is, given 5 candidate "
    "descriptions for the images potential descriptions available for the sequence "
    "of images, choose the description which is the most fitting. You are required "
    "to answer strictly in a JSON format, providing the final answer as follows: "
    '{"answer": <Option n>}'
)

RETRIEVAL_INSTRUCTION = (
    "You are given the scenes from an advertisement video, and a detailed "
    "description of the video, including description of each scenes in the video, "
    "audio transcript of the video, and title of the video. Your task is to respond "
    "with what a person may say, when they are trying to remember this advertisement "
    "video. Precisely, if a person vaguely remembers the video, and is trying to "
    "retrieve a description of the video from their own memory, what are some "
    "possible things that they may say? Answer by considering all information about "
    "the given video: Audio Transcript: ....., OCR: ......."
)


def judge_content_prompt(post_text: str, answer_text: str) -> str:
    """Interpolate a post and its candidate answer into the judge template."""
    return f"{JUDGE_CONTENT_PROMPT}\n{post_text}\n{answer_text}"


def prr_prompt(scene_paths: list[str], candidates: list[str]) -> str:
    """Compose one ranking request: instruction, scene image list, five options."""
    lines = [PRR_INSTRUCTION, ""]
    lines.append("Scene images:")
    lines.extend(scene_paths)
    lines.append("")
    for i, candidate in enumerate(candidates, start=1):
        lines.append(f"Option {i}: {candidate}")
    return "\n".join(lines)
