"""The cache-first query loop: hit detection, and retrieval plus integration on a miss."""

from __future__ import annotations

import enum
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .cache.build import ChangeEvent, apply_change, evict, load_segments_for_query
from .cache.segments import CacheEntry, CacheSegment, EvictionError, nearest_segment
from .cache.snapshot import CacheSnapshot
from .config import EngineConfig
from .corpus import tokenize
from .embed import VectorIndex, cosine, embed_text, index_topm
from .rank import QueryBuffer, offline_prior, snippet_score
from .summarize import summarize_representation
from .syncorpus import TraceRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HybridConfig:
    hit_threshold_tau: float = 0.6
    retrieval_m: int = 3
    miss_summary_tokens: int = 24

    def __post_init__(self):
        if not 0.0 <= self.hit_threshold_tau <= 1.0:
            raise ValueError("hit_threshold_tau must lie in [0, 1]")
        if self.retrieval_m < 1 or self.miss_summary_tokens < 1:
            raise ValueError("retrieval_m and miss_summary_tokens must be >= 1")

    @classmethod
    def from_engine(cls, cfg: EngineConfig) -> HybridConfig:
        return cls(cfg.tau, cfg.retrieval_m, cfg.miss_summary_tokens)


class Origin(str, enum.Enum):
    CACHED = "cached"
    RETRIEVED = "retrieved"


class ContextEntry(NamedTuple):
    node_id: str
    text: str
    score: float
    origin: Origin
    token_count: int
    sentences: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "text": self.text,
            "score": self.score,
            "origin": self.origin.value,
            "token_count": self.token_count,
        }


@dataclass(frozen=True)
class AssembledContext:
    entries: tuple[ContextEntry, ...]
    total_tokens: int
    query_id: str

    def texts(self) -> list[str]:
        return [e.text for e in self.entries]

    def sentences(self) -> set[str]:
        return {s for e in self.entries for s in e.sentences}

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "total_tokens": self.total_tokens,
            "entries": [e.to_dict() for e in self.entries],
        }


class BudgetTooSmall(ValueError):
    def __init__(self, budget: int, minimum: int):
        self.budget = budget
        self.minimum = minimum
        super().__init__(
            f"token budget {budget} cannot hold one retrieved summary; minimum viable budget is {minimum}"
        )


def assemble(
    snapshot: CacheSnapshot, query_id: str = "", retrieved: Iterable[str] = ()
) -> AssembledContext:
    fresh = set(retrieved)
    entries = sorted(
        (
            ContextEntry(
                e.node_id,
                e.text,
                e.score,
                Origin.RETRIEVED if e.node_id in fresh else Origin.CACHED,
                e.token_count,
                e.sentences,
            )
            for e in snapshot.entries(loaded_only=True)
        ),
        key=lambda c: (-c.score, c.node_id),
    )
    return AssembledContext(tuple(entries), sum(e.token_count for e in entries), query_id)


def detect_cache_hit(snapshot: CacheSnapshot, q_vec: np.ndarray, tau: float) -> tuple[bool, float]:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    best = max((cosine(e.vec, q_vec) for e in snapshot.entries(loaded_only=True)), default=0.0)
    loaded = any(s.loaded and s.entries for s in snapshot.segments)
    return (loaded and best >= tau), best


def distill_query(query_text: str, context: AssembledContext | Iterable[str]) -> str:
    """The query's tokens not covered by the context, deduplicated in first-seen order."""
    texts = context.texts() if isinstance(context, AssembledContext) else context
    covered = {t for text in texts for t in tokenize(text)}
    toks = tokenize(query_text)
    gaps = list(dict.fromkeys(t for t in toks if t not in covered))
    return " ".join(gaps if gaps else toks)


@dataclass
class AugmentResult:
    snapshot: CacheSnapshot
    context: AssembledContext
    hit: bool
    best_similarity: float
    loaded_segments: list[int]
    retrieved: list[str] = field(default_factory=list)
    integrated: list[str] = field(default_factory=list)
    evicted: list[str] = field(default_factory=list)
    distilled: str | None = None


def retrieved_entry(
    snapshot: CacheSnapshot, doc_id: str, q_vec: np.ndarray, buffer: QueryBuffer, cfg: HybridConfig
) -> CacheEntry:
    """Summarize a retrieved document and score it against the live query buffer."""
    ecfg = snapshot.config
    tree = snapshot.knowledge.hierarchy(doc_id)
    rep = summarize_representation(tree, tree.root, cfg.miss_summary_tokens, q_vec)
    vec = embed_text(rep.text)
    prior = offline_prior(vec, snapshot.build.centroid, ecfg.prior_mode)
    score = snippet_score(vec, buffer, prior, ecfg.alpha)
    version = snapshot.knowledge.get(doc_id).version
    return CacheEntry(doc_id, rep.text, rep.token_count, score, doc_id, version, rep.sentences)


def _fit(snapshot: CacheSnapshot, pinned: set[str], evicted: list[str]) -> CacheSnapshot:
    over = snapshot.loaded_tokens() - snapshot.total_budget
    if over > 0:
        snapshot, gone = evict(snapshot, over, pinned)
        evicted.extend(gone)
    return snapshot


def augment(
    snapshot: CacheSnapshot,
    index: VectorIndex,
    query_text: str,
    cfg: HybridConfig,
    buffer: QueryBuffer,
    query_id: str = "",
) -> AugmentResult:
    """Answer one query against a copy of ``snapshot``.

    ``buffer`` must already contain the query. The returned snapshot carries
    any segment loading, evictions and retrieved entries.
    """
    snap = snapshot.copy()
    q_vec = embed_text(query_text)
    loaded_ids = load_segments_for_query(snap, q_vec, snap.config.max_segments)
    evicted: list[str] = []
    snap = _fit(snap, set(), evicted)
    hit, best = detect_cache_hit(snap, q_vec, cfg.hit_threshold_tau)
    if hit:
        return AugmentResult(snap, assemble(snap, query_id), True, best, loaded_ids, evicted=evicted)

    distilled = distill_query(query_text, assemble(snap, query_id))
    found = [doc_id for doc_id, _ in index_topm(index, embed_text(distilled), cfg.retrieval_m)]
    integrated: list[str] = []
    for rank, doc_id in enumerate(found):
        entry = retrieved_entry(snap, doc_id, q_vec, buffer, cfg)
        if entry.token_count > snap.total_budget:
            if rank == 0:
                raise BudgetTooSmall(snap.total_budget, entry.token_count)
            continue
        # a document retrieved again replaces its earlier summary
        for seg in snap.segments:
            if any(e.node_id == entry.node_id for e in seg.entries):
                seg.entries = [e for e in seg.entries if e.node_id != entry.node_id]
                seg.refresh()
        pinned = set(integrated)
        need = snap.loaded_tokens() + entry.token_count - snap.total_budget
        if need > 0:
            try:
                snap, gone = evict(snap, need, pinned)
            except EvictionError:
                if rank == 0:
                    raise BudgetTooSmall(snap.total_budget, entry.token_count) from None
                continue
            evicted.extend(gone)
        loaded = [s for s in snap.segments if s.loaded]
        if loaded:
            seg = nearest_segment(loaded, entry.vec)
        else:
            seg = CacheSegment.of(max((s.segment_id for s in snap.segments), default=-1) + 1, [])
            snap.segments.append(seg)
        seg.entries.append(entry)
        seg.refresh()
        integrated.append(entry.node_id)
    ctx = assemble(snap, query_id, integrated)
    return AugmentResult(snap, ctx, False, best, loaded_ids, found, integrated, evicted, distilled)


def knowledge_index(snapshot: CacheSnapshot) -> VectorIndex:
    return VectorIndex.from_texts((d.doc_id, d.text) for d in snapshot.knowledge.documents.values())


class Engine:
    """A live cache plus retrieval index, safe to share between threads.

    Queries and updates are serialized by one lock: a miss mutates the cache
    and every query updates the shared query buffer.
    """

    def __init__(self, snapshot: CacheSnapshot):
        self.snapshot = snapshot
        self.cfg = snapshot.config
        self.hybrid = HybridConfig.from_engine(self.cfg)
        self.index = knowledge_index(snapshot)
        self.buffer = QueryBuffer(self.cfg.buffer_n)
        self.metrics: list[dict] = []
        self.peak_loaded_tokens = 0
        self._n = 0
        self._lock = threading.Lock()

    def answer(self, query_text: str, query_id: str | None = None) -> tuple[AssembledContext, dict]:
        return answer_context(self, query_text, query_id)

    def update(self, event: ChangeEvent) -> list[str]:
        with self._lock:
            snap, changed = apply_change(self.snapshot, event)
            if event.op.value == "delete":
                self.index.remove(event.doc_id)
            else:
                self.index.replace(event.doc_id, embed_text(event.text))
            self.snapshot = snap
            return changed

    def stats(self) -> dict:
        with self._lock:
            return aggregate(self.metrics, self.snapshot)


def answer_context(engine: Engine, query_text: str, query_id: str | None = None) -> tuple[AssembledContext, dict]:
    t0 = time.perf_counter_ns()
    with engine._lock:
        if query_id is None:
            query_id = f"q{engine._n:04d}"
        engine._n += 1
        engine.buffer = engine.buffer.push(embed_text(query_text))
        res = augment(engine.snapshot, engine.index, query_text, engine.hybrid, engine.buffer, query_id)
        engine.snapshot = res.snapshot
        engine.peak_loaded_tokens = max(engine.peak_loaded_tokens, res.snapshot.loaded_tokens())
        record = {
            "query_id": query_id,
            "hit": res.hit,
            "retrieved": len(res.retrieved),
            "evicted": len(res.evicted),
            "context_tokens": res.context.total_tokens,
            "elapsed_us": (time.perf_counter_ns() - t0) // 1000,
        }
        engine.metrics.append(record)
    log.debug("query %s: %s", query_id, record)
    return res.context, record


# replay ----------------------------------------------------------------

TIMING_FIELDS = ("elapsed_us", "p50_latency_us", "p99_latency_us")


def _percentile(values: list[int], q: float) -> int:
    if not values:
        return 0
    ordered = sorted(values)
    return ordered[max(0, math.ceil(q * len(ordered)) - 1)]


def aggregate(records: list[dict], snapshot: CacheSnapshot) -> dict:
    n = len(records)
    lat = [r["elapsed_us"] for r in records]
    scored = [r["retention"] for r in records if r.get("retention") is not None]
    return {
        "queries": n,
        "p50_latency_us": _percentile(lat, 0.50),
        "p99_latency_us": _percentile(lat, 0.99),
        "hit_rate": sum(r["hit"] for r in records) / n if n else 0.0,
        "mean_context_tokens": sum(r["context_tokens"] for r in records) / n if n else 0.0,
        "compression_ratio": snapshot.compression_ratio(),
        "retrieval_calls": sum(r["retrieved"] for r in records),
        "evictions": sum(r["evicted"] for r in records),
        "mean_retention": sum(scored) / len(scored) if scored else None,
    }


def replay(engine: Engine, trace: Iterable[TraceRecord]) -> dict:
    """Run a query trace and report per-query metrics plus aggregates.

    Queries that list critical sentences also get a ``retention`` field: the
    fraction of those sentences represented in the assembled context.
    """
    ratio = engine.snapshot.compression_ratio()
    records = []
    for rec in trace:
        ctx, metrics = answer_context(engine, rec.text, rec.query_id)
        metrics = dict(metrics)
        if rec.critical_sentence_ids:
            shown = ctx.sentences()
            crit = rec.critical_sentence_ids
            metrics["retention"] = sum(s in shown for s in crit) / len(crit)
        else:
            metrics["retention"] = None
        records.append(metrics)
    agg = aggregate(records, engine.snapshot)
    agg["compression_ratio"] = ratio
    return {"config_digest": engine.snapshot.config_digest, "queries": records, "aggregates": agg}


def strip_timing(report: dict) -> dict:
    """The report without wall-clock fields, for determinism comparisons."""
    out = {k: v for k, v in report.items() if k not in ("queries", "aggregates")}
    out["queries"] = [{k: v for k, v in r.items() if k not in TIMING_FIELDS} for r in report["queries"]]
    out["aggregates"] = {k: v for k, v in report["aggregates"].items() if k not in TIMING_FIELDS}
    return out
