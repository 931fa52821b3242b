"""Cache entries, topical segments, k-means segmentation and score-ordered eviction."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..corpus import count_tokens
from ..embed import DIM, cosine, embed_text, normalized_mean

MAX_LLOYD_ITERATIONS = 50


class EvictionError(RuntimeError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        self.shortfall = needed - available
        super().__init__(
            f"cannot free {needed} tokens: only {available} evictable, short by {self.shortfall}"
        )


@dataclass(frozen=True)
class CacheEntry:
    node_id: str
    text: str
    token_count: int
    score: float
    source_doc_id: str
    doc_version: int
    sentences: tuple[str, ...] = ()

    def __post_init__(self):
        if self.token_count != count_tokens(self.text):
            raise ValueError(f"token_count mismatch for entry {self.node_id!r}")
        # scores persist as float32
        object.__setattr__(self, "score", float(np.float32(self.score)))

    @property
    def vec(self) -> np.ndarray:
        return embed_text(self.text)

    @property
    def sort_key(self) -> tuple[float, str]:
        return (-self.score, self.node_id)


@dataclass
class CacheSegment:
    segment_id: int
    centroid: np.ndarray
    entries: list[CacheEntry] = field(default_factory=list)
    loaded: bool = True

    @classmethod
    def of(cls, segment_id: int, entries: Iterable[CacheEntry], loaded: bool = True) -> CacheSegment:
        seg = cls(segment_id, np.zeros(DIM), list(entries), loaded)
        seg.refresh()
        return seg

    def refresh(self) -> None:
        """Restore entry order and recompute the centroid after edits."""
        self.entries.sort(key=lambda e: e.sort_key)
        mean = normalized_mean([e.vec for e in self.entries])
        self.centroid = np.float32(mean).astype(np.float64)

    @property
    def tokens(self) -> int:
        return sum(e.token_count for e in self.entries)

    def copy(self) -> CacheSegment:
        return CacheSegment(self.segment_id, self.centroid.copy(), list(self.entries), self.loaded)

    def to_bytes(self) -> bytes:
        out = [struct.pack("<IB", self.segment_id, int(self.loaded))]
        out.append(np.asarray(self.centroid, dtype="<f4").tobytes())
        out.append(struct.pack("<I", len(self.entries)))
        for e in self.entries:
            out.append(pack_str(e.node_id))
            out.append(pack_str(e.text))
            out.append(struct.pack("<If", e.token_count, e.score))
            out.append(pack_str(e.source_doc_id))
            out.append(struct.pack("<II", e.doc_version, len(e.sentences)))
            out.extend(pack_str(s) for s in e.sentences)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, buf: bytes) -> CacheSegment:
        r = Reader(buf)
        seg_id, loaded = r.unpack("<IB")
        centroid = r.floats(DIM)
        entries = []
        for _ in range(r.u32()):
            node_id = r.str()
            text = r.str()
            tokens, score = r.unpack("<If")
            source = r.str()
            version, n_sent = r.unpack("<II")
            sentences = tuple(r.str() for _ in range(n_sent))
            entries.append(CacheEntry(node_id, text, tokens, score, source, version, sentences))
        r.done()
        return cls(seg_id, centroid, entries, bool(loaded))


def pack_str(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack("<I", len(data)) + data


class Reader:
    def __init__(self, buf: bytes, offset: int = 0):
        self.buf = buf
        self.off = offset

    def unpack(self, fmt: str) -> tuple:
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += struct.calcsize(fmt)
        return vals

    def u32(self) -> int:
        return self.unpack("<I")[0]

    def str(self) -> str:
        n = self.u32()
        s = self.buf[self.off : self.off + n].decode("utf-8")
        self.off += n
        return s

    def bytes(self, n: int) -> bytes:
        b = self.buf[self.off : self.off + n]
        if len(b) != n:
            raise ValueError("truncated input")
        self.off += n
        return b

    def floats(self, n: int) -> np.ndarray:
        arr = np.frombuffer(self.buf, dtype="<f4", count=n, offset=self.off).astype(np.float64)
        self.off += 4 * n
        return arr

    def done(self) -> None:
        if self.off != len(self.buf):
            raise ValueError(f"{len(self.buf) - self.off} unexpected trailing bytes")


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d2 = _sq_dists(x, np.array(centers)).min(axis=1)
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(x[idx])
    return np.array(centers)


def kmeans(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Lloyd iterations from k-means++ seeds; returns one label per row."""
    n = x.shape[0]
    k = min(k, n)
    rng = np.random.default_rng(seed)
    centers = kmeans_plusplus(x, k, rng)
    dist = _sq_dists(x, centers)
    labels = dist.argmin(axis=1)  # first minimum, i.e. lowest segment id on ties
    for _ in range(MAX_LLOYD_ITERATIONS):
        own = dist[np.arange(n), labels]
        taken: set[int] = set()
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
                continue
            # empty cluster: reseed on the point farthest from its own centre
            order = sorted(range(n), key=lambda i: (-own[i], i))
            far = next(i for i in order if i not in taken)
            taken.add(far)
            centers[j] = x[far]
        dist = _sq_dists(x, centers)
        new = dist.argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def cluster_segments(entries: Sequence[tuple[str, np.ndarray]], k: int, seed: int) -> dict[str, int]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not entries:
        raise ValueError("cannot cluster an empty entry list")
    x = np.stack([np.asarray(v, dtype=np.float64) for _, v in entries])
    labels = kmeans(x, k, seed)
    return {nid: int(lab) for (nid, _), lab in zip(entries, labels)}


def eviction_order(entries: Iterable[CacheEntry]) -> list[CacheEntry]:
    """Ascending score; among equal scores the larger node id goes first."""
    by_id = sorted(entries, key=lambda e: e.node_id, reverse=True)
    return sorted(by_id, key=lambda e: e.score)


def choose_evictions(entries: Iterable[CacheEntry], tokens_needed: int, pinned=frozenset()) -> list[CacheEntry]:
    if tokens_needed < 0:
        raise ValueError("tokens_needed must be >= 0")
    if tokens_needed == 0:
        return []
    cands = [e for e in entries if e.node_id not in pinned]
    available = sum(e.token_count for e in cands)
    if available < tokens_needed:
        raise EvictionError(tokens_needed, available)
    out, freed = [], 0
    for e in eviction_order(cands):
        if freed >= tokens_needed:
            break
        out.append(e)
        freed += e.token_count
    return out


def nearest_segment(segments: Sequence[CacheSegment], vec: np.ndarray) -> CacheSegment:
    return min(segments, key=lambda s: (-cosine(s.centroid, vec), s.segment_id))
