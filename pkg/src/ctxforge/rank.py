"""Snippet relevance scoring with a recent-query buffer, and top-fraction pruning."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .embed import cosine


class PriorMode(str, enum.Enum):
    UNIFORM = "uniform"
    CENTROID = "centroid_similarity"


@dataclass(frozen=True)
class QueryBuffer:
    """FIFO of the most recent query embeddings (most recent last)."""

    capacity: int
    entries: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        if len(self.entries) > self.capacity:
            object.__setattr__(self, "entries", tuple(self.entries[-self.capacity :]))

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, q_vec: np.ndarray) -> QueryBuffer:
        return QueryBuffer(self.capacity, (self.entries + (q_vec,))[-self.capacity :])


def update_query_buffer(buffer: QueryBuffer, q_vec: np.ndarray) -> QueryBuffer:
    return buffer.push(q_vec)


@dataclass(frozen=True)
class RankConfig:
    alpha: float = 0.5
    top_fraction: float = 0.4
    prior_mode: PriorMode = PriorMode.CENTROID

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.top_fraction <= 1.0:
            raise ValueError("top_fraction must lie in (0, 1]")


class ScoredSnippet(NamedTuple):
    node_id: str
    score: float


def relevance(s_vec: np.ndarray, q_vec: np.ndarray) -> float:
    """Cosine clamped to [0, 1]."""
    return max(0.0, cosine(s_vec, q_vec))


def snippet_score(s_vec: np.ndarray, buffer: QueryBuffer, prior: float, alpha: float) -> float:
    """alpha * mean relevance to buffered queries + (1 - alpha) * prior.

    The mean runs over the queries actually held, so a cold buffer gives
    ``(1 - alpha) * prior``.
    """
    if buffer.entries:
        realtime = sum(relevance(s_vec, q) for q in buffer.entries) / len(buffer.entries)
    else:
        realtime = 0.0
    return alpha * realtime + (1.0 - alpha) * prior


def offline_prior(s_vec: np.ndarray, corpus_centroid: np.ndarray, mode: PriorMode) -> float:
    if PriorMode(mode) is PriorMode.UNIFORM:
        return 0.5
    return relevance(s_vec, corpus_centroid)


def retain_count(n: int, fraction: float) -> int:
    # Rounded first so 0.3 * 10 keeps 3, not ceil(3.0000000000000004) = 4.
    return min(n, math.ceil(round(fraction * n, 9)))


def select_top_fraction(scored: Sequence[ScoredSnippet], top_fraction: float) -> list[ScoredSnippet]:
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must lie in (0, 1]")
    if not scored:
        return []
    ordered = sorted(scored, key=lambda s: (-s.score, s.node_id))
    return ordered[: retain_count(len(ordered), top_fraction)]
