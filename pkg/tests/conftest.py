from __future__ import annotations

import numpy as np
import pytest

from totr.clients import ServiceUnavailable, StubEmbedder


class QueueJudge:
    """Scripted judge: returns canned replies in order, then repeats the last."""

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls: list[str] = []

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        if not self.replies:
            raise ServiceUnavailable("queue exhausted")
        if len(self.replies) == 1:
            return self.replies[0]
        return self.replies.pop(0)


class FnJudge:
    """Scripted judge computing its reply from the prompt."""

    def __init__(self, fn):
        self.fn = fn
        self.calls: list[str] = []

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        return self.fn(prompt)


class DownJudge:
    def complete(self, prompt: str) -> str:
        raise ServiceUnavailable("scripted outage")


class ScriptedNer:
    """NER stub replying with a fixed span table keyed by exact text."""

    def __init__(self, table: dict[str, list[tuple[int, int, str]]]):
        self.table = table

    def spans(self, text: str) -> list[tuple[int, int, str]]:
        return list(self.table.get(text, []))


class DownNer:
    def spans(self, text: str) -> list[tuple[int, int, str]]:
        raise ServiceUnavailable("scripted outage")


class BasisEmbedder:
    """Maps the i-th request of each call to basis vector e_i."""

    def __init__(self, dim: int):
        self.dim = dim

    def embed(self, instruction, items):
        out = np.zeros((len(items), self.dim), dtype=np.float32)
        for i in range(len(items)):
            out[i, i % self.dim] = 1.0
        return out


class TokenTableEmbedder:
    """Per-token embedder with a fixed vector table; unknown tokens get a stub vector."""

    def __init__(self, table: dict[str, list[float]], dim: int):
        self.table = table
        self.dim = dim
        self._stub = StubEmbedder(dim)

    def embed(self, instruction, items):
        rows = []
        for item in items:
            if item.text in self.table:
                rows.append(np.asarray(self.table[item.text], dtype=np.float32))
            else:
                rows.append(self._stub.embed(instruction, [item])[0])
        return np.vstack(rows)


@pytest.fixture
def stub_embedder() -> StubEmbedder:
    return StubEmbedder(dim=48)
