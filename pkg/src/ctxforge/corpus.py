"""Corpus ingestion, tokenization and the document/paragraph/sentence hierarchy.

Token accounting everywhere in the package goes through :func:`tokenize`: a
token is a maximal run of alphanumeric characters, lowercased.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

_TOKEN_RE = re.compile(r"[^\W_]+")
_PARAGRAPH_RE = re.compile(r"\n[ \t\r\f\v]*\n\s*")
_SENTENCE_RE = re.compile(r"(?<=[.?!])\s+")


class CorpusError(ValueError):
    """Raised for malformed corpus records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def count_tokens(text: str) -> int:
    return len(tokenize(text))


class Level(enum.IntEnum):
    DOCUMENT = 0
    PARAGRAPH = 1
    SENTENCE = 2


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    topic_hint: str | None = None
    version: int = 1

    def __post_init__(self):
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise CorpusError("doc_id must be a non-empty string")
        if not isinstance(self.version, int) or isinstance(self.version, bool) or self.version < 1:
            raise CorpusError(f"version must be an integer >= 1 (doc {self.doc_id!r})")

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "text": self.text,
            "topic_hint": self.topic_hint,
            "version": self.version,
        }


@dataclass(frozen=True)
class HierarchyNode:
    node_id: str
    level: Level
    text: str
    token_count: int
    parent: str | None
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class Hierarchy:
    """The three-level snippet tree of one document.

    ``nodes`` is keyed by node id and ordered depth-first (document order).
    """

    doc_id: str
    root: str
    nodes: Mapping[str, HierarchyNode]

    def __getitem__(self, node_id: str) -> HierarchyNode:
        return self.nodes[node_id]

    def __iter__(self) -> Iterator[HierarchyNode]:
        return iter(self.nodes.values())

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root_node(self) -> HierarchyNode:
        return self.nodes[self.root]

    def sentences(self, node_id: str | None = None) -> list[HierarchyNode]:
        """Sentence leaves under ``node_id`` (default: the root), in document order."""
        node = self.nodes[node_id or self.root]
        if node.level is Level.SENTENCE:
            return [node]
        out: list[HierarchyNode] = []
        for child in node.children:
            out.extend(self.sentences(child))
        return out

    def descendants(self, node_id: str) -> list[str]:
        out: list[str] = []
        stack = list(reversed(self.nodes[node_id].children))
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return out

    def restrict(self, keep_sentences: set[str]) -> Hierarchy:
        """Copy of the tree keeping only the given sentences.

        Paragraphs left without sentences are dropped; inner node text and
        token counts are rebuilt from the surviving sentences.
        """
        nodes: dict[str, HierarchyNode] = {}
        root = self.root_node
        para_ids = []
        for pid in root.children:
            para = self.nodes[pid]
            kept = [sid for sid in para.children if sid in keep_sentences]
            if not kept:
                continue
            para_ids.append(pid)
            nodes[pid] = HierarchyNode(
                pid,
                Level.PARAGRAPH,
                " ".join(self.nodes[s].text for s in kept),
                sum(self.nodes[s].token_count for s in kept),
                root.node_id,
                tuple(kept),
            )
            for sid in kept:
                nodes[sid] = self.nodes[sid]
        root_copy = HierarchyNode(
            root.node_id,
            Level.DOCUMENT,
            "\n\n".join(nodes[p].text for p in para_ids),
            sum(nodes[p].token_count for p in para_ids),
            None,
            tuple(para_ids),
        )
        ordered = {root.node_id: root_copy}
        for pid in para_ids:
            ordered[pid] = nodes[pid]
            for sid in nodes[pid].children:
                ordered[sid] = nodes[sid]
        return Hierarchy(self.doc_id, self.root, ordered)


def split_paragraphs(text: str) -> list[str]:
    return [p.strip() for p in _PARAGRAPH_RE.split(text) if p.strip()]


def split_sentences(paragraph: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_RE.split(paragraph.strip()) if s.strip()]


def segment_document(doc: Document) -> Hierarchy:
    """Build the document -> paragraph -> sentence tree.

    Node ids are ``doc_id``, ``doc_id/p<i>`` and ``doc_id/p<i>/s<j>``.
    """
    root_id = doc.doc_id
    nodes: dict[str, HierarchyNode] = {}
    para_ids = []
    body: dict[str, HierarchyNode] = {}
    for i, para in enumerate(split_paragraphs(doc.text)):
        pid = f"{root_id}/p{i}"
        sids = []
        for j, sent in enumerate(split_sentences(para)):
            sid = f"{pid}/s{j}"
            sids.append(sid)
            body[sid] = HierarchyNode(sid, Level.SENTENCE, sent, count_tokens(sent), pid)
        para_ids.append(pid)
        body[pid] = HierarchyNode(pid, Level.PARAGRAPH, para, count_tokens(para), root_id, tuple(sids))
    nodes[root_id] = HierarchyNode(
        root_id, Level.DOCUMENT, doc.text, count_tokens(doc.text), None, tuple(para_ids)
    )
    for pid in para_ids:
        nodes[pid] = body[pid]
        for sid in body[pid].children:
            nodes[sid] = body[sid]
    return Hierarchy(doc.doc_id, root_id, nodes)


@dataclass(frozen=True)
class CorpusStore:
    """Immutable doc_id -> (Document, Hierarchy) map, ordered by doc_id."""

    documents: Mapping[str, Document] = field(default_factory=dict)
    hierarchies: Mapping[str, Hierarchy] = field(default_factory=dict)

    @classmethod
    def from_documents(cls, docs: Iterable[Document]) -> CorpusStore:
        latest: dict[str, Document] = {}
        for doc in docs:
            prev = latest.get(doc.doc_id)
            if prev is None or doc.version > prev.version:
                latest[doc.doc_id] = doc
        ordered = {k: latest[k] for k in sorted(latest)}
        return cls(ordered, {k: segment_document(d) for k, d in ordered.items()})

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.documents

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[str]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        return self.documents[doc_id]

    def hierarchy(self, doc_id: str) -> Hierarchy:
        return self.hierarchies[doc_id]

    def with_document(self, doc: Document) -> CorpusStore:
        docs = dict(self.documents)
        docs[doc.doc_id] = doc
        hier = dict(self.hierarchies)
        hier[doc.doc_id] = segment_document(doc)
        keys = sorted(docs)
        return CorpusStore({k: docs[k] for k in keys}, {k: hier[k] for k in keys})

    def without(self, doc_id: str) -> CorpusStore:
        return CorpusStore(
            {k: v for k, v in self.documents.items() if k != doc_id},
            {k: v for k, v in self.hierarchies.items() if k != doc_id},
        )

    def subset(self, doc_ids: Iterable[str]) -> CorpusStore:
        wanted = set(doc_ids)
        return CorpusStore(
            {k: v for k, v in self.documents.items() if k in wanted},
            {k: v for k, v in self.hierarchies.items() if k in wanted},
        )

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(d.to_record(), sort_keys=True, ensure_ascii=False) + "\n"
            for d in self.documents.values()
        )

    def total_tokens(self) -> int:
        return sum(h.root_node.token_count for h in self.hierarchies.values())


def parse_record(obj: object, line: int | None = None) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError("record must be a JSON object", line)
    missing = [k for k in ("doc_id", "text", "version") if k not in obj]
    if missing:
        raise CorpusError(f"missing field(s): {', '.join(missing)}", line)
    doc_id, text, version = obj["doc_id"], obj["text"], obj["version"]
    topic = obj.get("topic_hint")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError("doc_id must be a non-empty string", line)
    if not isinstance(text, str):
        raise CorpusError("text must be a string", line)
    if topic is not None and not isinstance(topic, str):
        raise CorpusError("topic_hint must be a string or null", line)
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        raise CorpusError("version must be an integer >= 1", line)
    return Document(doc_id, text, topic, version)


def read_documents(source: Iterable[str]) -> list[Document]:
    """Parse JSON-lines records; blank lines are skipped."""
    docs = []
    seen: set[tuple[str, int]] = set()
    for lineno, raw in enumerate(source, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON ({exc.msg})", lineno) from None
        doc = parse_record(obj, lineno)
        key = (doc.doc_id, doc.version)
        if key in seen:
            raise CorpusError(f"duplicate record for doc {doc.doc_id!r} version {doc.version}", lineno)
        seen.add(key)
        docs.append(doc)
    return docs


def ingest_corpus(source: Iterable[str] | str | Path) -> CorpusStore:
    """Build a :class:`CorpusStore` from a JSON-lines file path or an iterable of lines."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return CorpusStore.from_documents(read_documents(fh))
    return CorpusStore.from_documents(read_documents(source))


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_record(), sort_keys=True, ensure_ascii=False) + "\n")
