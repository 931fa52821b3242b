"""Building the cache, evicting from it, segment loading and incremental updates."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..acc import BuildState, cold_score, compress_document, compute_build_state, f32
from ..config import EngineConfig
from ..corpus import CorpusError, CorpusStore, Document, Hierarchy, count_tokens
from ..embed import cosine, embed_text
from ..policy.network import PolicyParams
from .segments import CacheEntry, CacheSegment, choose_evictions, cluster_segments, nearest_segment
from .snapshot import CacheSnapshot
from .truncate import idf_table, truncate_tokens

log = logging.getLogger(__name__)

RECLUSTER_RATIO = 2.0


class ChangeOp(str, enum.Enum):
    ADD = "add"
    EDIT = "edit"
    DELETE = "delete"


@dataclass(frozen=True)
class ChangeEvent:
    op: ChangeOp
    doc_id: str
    version: int
    text: str | None = None
    topic_hint: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "op", ChangeOp(self.op))
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise CorpusError("change event needs a non-empty doc_id")
        if not isinstance(self.version, int) or isinstance(self.version, bool) or self.version < 1:
            raise CorpusError("change event version must be an integer >= 1")
        if self.op is not ChangeOp.DELETE and not isinstance(self.text, str):
            raise CorpusError(f"{self.op.value} event for {self.doc_id!r} needs a text")

    @property
    def document(self) -> Document:
        return Document(self.doc_id, self.text or "", self.topic_hint, self.version)

    def to_record(self) -> dict:
        return {
            "op": self.op.value,
            "doc_id": self.doc_id,
            "version": self.version,
            "text": self.text,
            "topic_hint": self.topic_hint,
        }

    @classmethod
    def from_record(cls, obj: object, line: int | None = None) -> ChangeEvent:
        if not isinstance(obj, dict):
            raise CorpusError("change event must be a JSON object", line)
        missing = [k for k in ("op", "doc_id", "version") if k not in obj]
        if missing:
            raise CorpusError(f"missing field(s): {', '.join(missing)}", line)
        try:
            return cls(obj["op"], obj["doc_id"], obj["version"], obj.get("text"), obj.get("topic_hint"))
        except CorpusError as exc:
            raise CorpusError(exc.args[0], line) from None
        except ValueError:
            raise CorpusError(f"unknown op {obj['op']!r}", line) from None


def read_changes(source: Iterable[str]) -> list[ChangeEvent]:
    out = []
    for lineno, raw in enumerate(source, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from None
        out.append(ChangeEvent.from_record(obj, lineno))
    return out


class StaleChangeError(ValueError):
    pass


# building --------------------------------------------------------------


def frozen_idf(store: CorpusStore) -> dict[str, float]:
    return {tok: f32(v) for tok, v in sorted(idf_table(d.text for d in store.documents.values()).items())}


def doc_entries(
    tree: Hierarchy,
    version: int,
    state: BuildState,
    cfg: EngineConfig,
    idf: dict[str, float],
    policy: PolicyParams | None,
) -> list[CacheEntry]:
    """Compress one document and turn its representations into truncated, scored entries."""
    comp = compress_document(tree, state, cfg, policy)
    out = []
    for rep in comp.representations:
        text = truncate_tokens(rep.text, cfg.keep_fraction, idf)
        out.append(
            CacheEntry(
                rep.node_id,
                text,
                count_tokens(text),
                cold_score(embed_text(text), state.centroid, cfg),
                tree.doc_id,
                version,
                rep.sentences,
            )
        )
    return out


def build_cache(
    store: CorpusStore,
    cfg: EngineConfig = EngineConfig(),
    policy: PolicyParams | None = None,
    knowledge: CorpusStore | None = None,
) -> CacheSnapshot:
    """Compress every document, cluster the entries and enforce the token budget.

    ``knowledge`` is the retrieval corpus used on cache misses; it defaults
    to ``store`` and always includes it.
    """
    state = compute_build_state(store, cfg)
    idf = frozen_idf(store)
    entries: list[CacheEntry] = []
    nodes = 0
    for doc_id, tree in store.hierarchies.items():
        entries.extend(doc_entries(tree, store.get(doc_id).version, state, cfg, idf, policy))
        nodes += len(tree)
    emitted = sum(e.token_count for e in entries)
    over = emitted - cfg.token_budget
    dropped = {e.node_id for e in choose_evictions(entries, over)} if over > 0 else set()
    entries = [e for e in entries if e.node_id not in dropped]

    segments = segment_entries(entries, cfg.resolve_k(len(store)), cfg.seed)
    kb = knowledge if knowledge is not None else store
    for doc in store.documents.values():
        if doc.doc_id not in kb or kb.get(doc.doc_id).version < doc.version:
            kb = kb.with_document(doc)
    snap = CacheSnapshot(
        segments,
        cfg.token_budget,
        cfg,
        state,
        {d: store.get(d).version for d in store},
        kb,
        policy,
        idf,
    )
    snap.stats = {
        "docs": len(store),
        "nodes": sum(len(h) for h in store.hierarchies.values()),
        "nodes_processed": nodes,
        "entries": len(entries),
        "emitted_tokens": emitted,
        "evicted_at_build": len(dropped),
        "cached_tokens": snap.total_tokens(),
        "original_tokens": store.total_tokens(),
        "compression_ratio": snap.compression_ratio(),
        "segments": snap.k,
    }
    log.info("built cache: %s", snap.stats)
    return snap


def segment_entries(entries: list[CacheEntry], k: int, seed: int, loaded: bool = True) -> list[CacheSegment]:
    if not entries:
        return [CacheSegment.of(0, [], loaded)]
    labels = cluster_segments([(e.node_id, e.vec) for e in entries], k, seed)
    groups: dict[int, list[CacheEntry]] = {}
    for e in entries:
        groups.setdefault(labels[e.node_id], []).append(e)
    return [CacheSegment.of(i, groups[lab], loaded) for i, lab in enumerate(sorted(groups))]


# eviction and loading ---------------------------------------------------


def evict(
    snapshot: CacheSnapshot, tokens_needed: int, pinned: Iterable[str] = ()
) -> tuple[CacheSnapshot, list[str]]:
    """Drop the lowest-scoring loaded entries until ``tokens_needed`` tokens are free.

    Returns a new snapshot and the evicted node ids in eviction order.
    """
    loaded = snapshot.entries(loaded_only=True)
    victims = choose_evictions(loaded, tokens_needed, frozenset(pinned))
    out = snapshot.copy()
    if not victims:
        return out, []
    gone = {e.node_id for e in victims}
    for seg in out.segments:
        if seg.loaded and any(e.node_id in gone for e in seg.entries):
            seg.entries = [e for e in seg.entries if e.node_id not in gone]
            seg.refresh()
    return out, [e.node_id for e in victims]


def rank_segments(snapshot: CacheSnapshot, q_vec: np.ndarray) -> list[int]:
    order = sorted(snapshot.segments, key=lambda s: (-cosine(s.centroid, q_vec), s.segment_id))
    return [s.segment_id for s in order]


def load_segments_for_query(snapshot: CacheSnapshot, q_vec: np.ndarray, max_segments: int) -> list[int]:
    """Mark the ``max_segments`` segments closest to the query loaded and the rest unloaded."""
    if max_segments < 1:
        raise ValueError("max_segments must be >= 1")
    chosen = rank_segments(snapshot, q_vec)[:max_segments]
    keep = set(chosen)
    for seg in snapshot.segments:
        seg.loaded = seg.segment_id in keep
    return chosen


# incremental updates ----------------------------------------------------


def check_change(snapshot: CacheSnapshot, event: ChangeEvent) -> None:
    recorded = snapshot.corpus_version.get(event.doc_id)
    if event.op is ChangeOp.ADD:
        if recorded is not None:
            raise StaleChangeError(f"add of {event.doc_id!r}: document already cached (use edit)")
        known = snapshot.knowledge.documents.get(event.doc_id)
        if known is not None and event.version < known.version:
            raise StaleChangeError(
                f"add of {event.doc_id!r}: version {event.version} older than known {known.version}"
            )
        return
    if recorded is None:
        raise StaleChangeError(f"{event.op.value} of unknown doc_id {event.doc_id!r}")
    if event.version <= recorded:
        raise StaleChangeError(
            f"{event.op.value} of {event.doc_id!r}: version {event.version} is not newer than {recorded}"
        )


def apply_change(snapshot: CacheSnapshot, event: ChangeEvent) -> tuple[CacheSnapshot, list[str]]:
    """Apply one change-feed event; returns (new snapshot, recompute log).

    The recompute log lists the node ids of the document that was pushed
    through the compression pipeline again (empty for deletes). Segments
    that hold none of the document's entries are left untouched unless an
    add unbalances the segments enough to force a re-cluster.
    """
    check_change(snapshot, event)
    snap = snapshot.copy()
    cfg = snap.config
    touched: set[int] = set()
    previous: dict[str, int] = {}
    for seg in snap.segments:
        if any(e.source_doc_id == event.doc_id for e in seg.entries):
            for e in seg.entries:
                if e.source_doc_id == event.doc_id:
                    previous[e.node_id] = seg.segment_id
            seg.entries = [e for e in seg.entries if e.source_doc_id != event.doc_id]
            touched.add(seg.segment_id)

    log_ids: list[str] = []
    if event.op is ChangeOp.DELETE:
        del snap.corpus_version[event.doc_id]
        snap.knowledge = snap.knowledge.without(event.doc_id)
    else:
        doc = event.document
        snap.knowledge = snap.knowledge.with_document(doc)
        snap.corpus_version[doc.doc_id] = doc.version
        tree = snap.knowledge.hierarchy(doc.doc_id)
        log_ids = list(tree.nodes)
        by_id = {s.segment_id: s for s in snap.segments}
        for e in doc_entries(tree, doc.version, snap.build, cfg, snap.idf, snap.policy):
            seg_id = previous.get(e.node_id)
            seg = by_id[seg_id] if seg_id is not None else nearest_segment(snap.segments, e.vec)
            seg.entries.append(e)
            touched.add(seg.segment_id)

    for seg in snap.segments:
        if seg.segment_id in touched:
            seg.refresh()

    if event.op is ChangeOp.ADD and needs_recluster(snap.segments):
        log.info("segment imbalance after adding %s: re-clustering", event.doc_id)
        k = cfg.resolve_k(len(snap.corpus_version))
        snap.segments = segment_entries(snap.entries(), k, cfg.seed, loaded=False)
    elif snap.loaded_tokens() > snap.total_budget:
        for seg in snap.segments:
            if seg.segment_id in touched:
                seg.loaded = False
    snap.stats = {"op": event.op.value, "doc_id": event.doc_id, "nodes_processed": len(log_ids)}
    return snap, log_ids


def needs_recluster(segments: list[CacheSegment]) -> bool:
    sizes = [len(s.entries) for s in segments]
    if len(sizes) < 2:
        return False
    mean = sum(sizes) / len(sizes)
    return max(sizes) > RECLUSTER_RATIO * mean
