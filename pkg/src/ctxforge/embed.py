"""Hashed bag-of-words embeddings, cosine similarity and an exact top-m index."""

from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .corpus import tokenize

DIM = 256

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@lru_cache(maxsize=1 << 16)
def token_bucket(token: str, dim: int = DIM) -> int:
    return fnv1a_64(token.encode("utf-8")) % dim


def embed_tokens(tokens: Sequence[str], dim: int = DIM) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    if not tokens:
        return vec
    # Sorted so float accumulation order does not depend on dict ordering.
    for tok, tf in sorted(Counter(tokens).items()):
        vec[token_bucket(tok, dim)] += math.log1p(tf)
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@lru_cache(maxsize=1 << 15)
def _embed_cached(text: str) -> np.ndarray:
    vec = embed_tokens(tokenize(text))
    vec.flags.writeable = False
    return vec


def embed_text(text: str) -> np.ndarray:
    """Unit-norm (or all-zero for tokenless text) embedding of ``text``.

    The returned array is read-only and shared between calls.
    """
    return _embed_cached(text)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    val = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, val))


def normalized_mean(vectors: Iterable[np.ndarray], dim: int = DIM) -> np.ndarray:
    vecs = list(vectors)
    if not vecs:
        return np.zeros(dim)
    mean = np.mean(np.stack(vecs), axis=0)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else mean


class VectorIndex:
    """Exact brute-force cosine index keyed by doc id (insertion ordered)."""

    def __init__(self, entries: Iterable[tuple[str, np.ndarray]] = ()):
        self._ids: list[str] = []
        self._vecs: list[np.ndarray] = []
        self._pos: dict[str, int] = {}
        for doc_id, vec in entries:
            self.add(doc_id, vec)

    @classmethod
    def from_texts(cls, items: Iterable[tuple[str, str]]) -> VectorIndex:
        return cls((doc_id, embed_text(text)) for doc_id, text in items)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._pos

    @property
    def entries(self) -> list[tuple[str, np.ndarray]]:
        return list(zip(self._ids, self._vecs))

    def add(self, doc_id: str, vec: np.ndarray) -> None:
        if doc_id in self._pos:
            raise ValueError(f"duplicate doc_id in index: {doc_id!r}")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (DIM,):
            raise ValueError(f"expected a {DIM}-dimensional vector, got {vec.shape}")
        self._pos[doc_id] = len(self._ids)
        self._ids.append(doc_id)
        self._vecs.append(vec)

    def replace(self, doc_id: str, vec: np.ndarray) -> None:
        if doc_id not in self._pos:
            self.add(doc_id, vec)
            return
        self._vecs[self._pos[doc_id]] = np.asarray(vec, dtype=np.float64)

    def remove(self, doc_id: str) -> None:
        i = self._pos.pop(doc_id)
        del self._ids[i]
        del self._vecs[i]
        self._pos = {d: j for j, d in enumerate(self._ids)}

    def scores(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (DIM,):
            raise ValueError(f"dimension mismatch: {q.shape} vs ({DIM},)")
        return np.array([cosine(v, q) for v in self._vecs])


def index_topm(index: VectorIndex, q: np.ndarray, m: int) -> list[tuple[str, float]]:
    """Exact top-``m`` entries by cosine, ties broken by ascending doc id."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(index) == 0:
        return []
    scores = index.scores(q)
    ranked = sorted(zip(index._ids, scores.tolist()), key=lambda t: (-t[1], t[0]))
    return ranked[:m]
