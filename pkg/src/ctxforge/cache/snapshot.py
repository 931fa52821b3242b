"""The persisted cache state.

Binary layout (integers little-endian, floats 32-bit)::

    b"CTXCACHE1"
    u32 format version (1)
    u64 total_budget
    u32 k (number of segment blocks)
    str config_digest
    str engine config (canonical JSON)
    u32 n; n x (str doc_id, u32 version)          corpus version table
    f32[256] corpus centroid
    f32 pruning cut-off score, str cut-off node id, u32 per-document budget
    u32 n; n x (str token, f32 idf)                frozen truncation IDF table
    k x (u32 length, segment block)
    u32 n; n x (str doc_id, u32 version, u8 has_topic, [str topic], str text)
                                                  knowledge base (retrieval corpus)
    u32 length, policy blob (length 0 when absent)

``str`` is a u32 byte length followed by UTF-8. A segment block is
``CacheSegment.to_bytes()``.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..acc import BuildState
from ..config import EngineConfig
from ..corpus import CorpusStore, Document
from ..embed import DIM
from ..policy.network import PolicyParams
from .segments import CacheEntry, CacheSegment, Reader, pack_str

MAGIC = b"CTXCACHE1"
FORMAT_VERSION = 1


@dataclass
class CacheSnapshot:
    segments: list[CacheSegment]
    total_budget: int
    config: EngineConfig
    build: BuildState
    corpus_version: dict[str, int]
    knowledge: CorpusStore
    policy: PolicyParams | None = None
    idf: dict[str, float] = field(default_factory=dict)
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def config_digest(self) -> str:
        return snapshot_config_digest(self.config, self.policy)

    @property
    def k(self) -> int:
        return len(self.segments)

    def entries(self, loaded_only: bool = False) -> list[CacheEntry]:
        return [e for s in self.segments if s.loaded or not loaded_only for e in s.entries]

    def loaded_tokens(self) -> int:
        return sum(s.tokens for s in self.segments if s.loaded)

    def total_tokens(self) -> int:
        return sum(s.tokens for s in self.segments)

    def segment_of(self, node_id: str) -> CacheSegment | None:
        for s in self.segments:
            if any(e.node_id == node_id for e in s.entries):
                return s
        return None

    def cached_store(self) -> CorpusStore:
        return self.knowledge.subset(self.corpus_version)

    def original_tokens(self) -> int:
        return self.cached_store().total_tokens()

    def compression_ratio(self) -> float:
        orig = self.original_tokens()
        return 1.0 - self.total_tokens() / orig if orig else 0.0

    def represented_sentences(self, loaded_only: bool = False) -> set[str]:
        return {s for e in self.entries(loaded_only) for s in e.sentences}

    def copy(self) -> CacheSnapshot:
        return CacheSnapshot(
            [s.copy() for s in self.segments],
            self.total_budget,
            self.config,
            self.build,
            dict(self.corpus_version),
            self.knowledge,
            self.policy,
            self.idf,
            dict(self.stats),
        )

    # persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<IQI", FORMAT_VERSION, self.total_budget, len(self.segments))]
        out.append(pack_str(self.config_digest))
        out.append(pack_str(self.config.canonical_json()))
        out.append(struct.pack("<I", len(self.corpus_version)))
        for doc_id in sorted(self.corpus_version):
            out.append(pack_str(doc_id) + struct.pack("<I", self.corpus_version[doc_id]))
        out.append(np.asarray(self.build.centroid, dtype="<f4").tobytes())
        out.append(struct.pack("<f", self.build.cutoff_score))
        out.append(pack_str(self.build.cutoff_node))
        out.append(struct.pack("<I", self.build.doc_budget))
        out.append(struct.pack("<I", len(self.idf)))
        for tok in sorted(self.idf):
            out.append(pack_str(tok) + struct.pack("<f", self.idf[tok]))
        for seg in self.segments:
            block = seg.to_bytes()
            out.append(struct.pack("<I", len(block)) + block)
        out.append(struct.pack("<I", len(self.knowledge)))
        for doc in self.knowledge.documents.values():
            out.append(pack_str(doc.doc_id) + struct.pack("<IB", doc.version, doc.topic_hint is not None))
            if doc.topic_hint is not None:
                out.append(pack_str(doc.topic_hint))
            out.append(pack_str(doc.text))
        blob = self.policy.to_bytes() if self.policy is not None else b""
        out.append(struct.pack("<I", len(blob)) + blob)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, buf: bytes) -> CacheSnapshot:
        if buf[: len(MAGIC)] != MAGIC:
            raise ValueError("not a cache snapshot (bad magic)")
        r = Reader(buf, len(MAGIC))
        version, budget, k = r.unpack("<IQI")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported snapshot format version {version}")
        digest = r.str()
        config = EngineConfig.from_dict(json.loads(r.str()))
        corpus_version = {}
        for _ in range(r.u32()):
            doc_id = r.str()
            corpus_version[doc_id] = r.u32()
        centroid = r.floats(DIM)
        (cutoff,) = r.unpack("<f")
        build = BuildState(centroid, float(cutoff), r.str(), r.u32())
        idf = {}
        for _ in range(r.u32()):
            tok = r.str()
            idf[tok] = float(r.unpack("<f")[0])
        segments = [CacheSegment.from_bytes(r.bytes(r.u32())) for _ in range(k)]
        docs = []
        for _ in range(r.u32()):
            doc_id = r.str()
            dver, has_topic = r.unpack("<IB")
            topic = r.str() if has_topic else None
            docs.append(Document(doc_id, r.str(), topic, dver))
        blob = r.bytes(r.u32())
        r.done()
        policy = PolicyParams.from_bytes(blob) if blob else None
        snap = cls(segments, budget, config, build, corpus_version, CorpusStore.from_documents(docs), policy, idf)
        if snap.config_digest != digest:
            raise ValueError("snapshot config digest does not match its stored configuration")
        return snap

    def save(self, path: str | Path) -> bytes:
        data = self.to_bytes()
        Path(path).write_bytes(data)
        return data

    @classmethod
    def load(cls, path: str | Path) -> CacheSnapshot:
        return cls.from_bytes(Path(path).read_bytes())

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def snapshot_config_digest(config: EngineConfig, policy: PolicyParams | None) -> str:
    h = hashlib.sha256(config.canonical_json().encode("utf-8"))
    if policy is not None:
        h.update(policy.to_bytes())
    return h.hexdigest()
