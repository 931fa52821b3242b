"""Synthetic corpora with planted topics, critical sentences and query traces.

Each topic owns a disjoint vocabulary. Critical sentences are dense in their
topic's vocabulary and carry one unique answer token; filler sentences draw
mostly from a large shared vocabulary, so they are diffuse in embedding space.
Miss queries come from withheld documents written on withheld topics, which
are served by the retrieval index but never preloaded into the cache.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .corpus import Document, tokenize, write_documents
from .embed import token_bucket

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["", "", "n", "r", "s", "l", "x"]


@dataclass(frozen=True)
class CorpusSpec:
    n_topics: int = 3
    docs_per_topic: int = 8
    sentences_per_doc: int = 12
    critical_per_doc: int = 2
    vocab_per_topic: int = 10
    shared_vocab: int = 2000
    seed: int = 0
    sentences_per_paragraph: int = 4
    critical_len: int = 8
    filler_len: int = 9
    filler_topic_tokens: int = 1
    withheld_topics: int = 0
    n_queries: int | None = None
    miss_fraction: float = 0.0

    def __post_init__(self):
        for name in ("n_topics", "docs_per_topic", "sentences_per_doc", "critical_per_doc",
                     "vocab_per_topic", "sentences_per_paragraph", "critical_len", "filler_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.shared_vocab < 0 or self.withheld_topics < 0:
            raise ValueError("shared_vocab and withheld_topics must be >= 0")
        if self.critical_per_doc > self.sentences_per_doc:
            raise ValueError("critical_per_doc cannot exceed sentences_per_doc")
        if not 0.0 <= self.miss_fraction <= 1.0:
            raise ValueError("miss_fraction must lie in [0, 1]")
        if self.miss_fraction > 0 and self.withheld_topics == 0:
            raise ValueError("miss queries need withheld_topics >= 1")
        if self.n_queries is not None and self.n_queries < 1:
            raise ValueError("n_queries must be >= 1")

    @classmethod
    def standard(cls, seed: int = 0, **overrides) -> CorpusSpec:
        """The 3 topics x 8 docs x 12 sentences corpus used for acceptance runs."""
        return cls(seed=seed, **overrides)

    @classmethod
    def from_json(cls, path: str | Path) -> CorpusSpec:
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class TraceRecord:
    query_id: str
    text: str
    relevant_doc_ids: tuple[str, ...] | None = None
    critical_sentence_ids: tuple[str, ...] | None = None

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "text": self.text,
            "relevant_doc_ids": list(self.relevant_doc_ids) if self.relevant_doc_ids is not None else None,
            "critical_sentence_ids": (
                list(self.critical_sentence_ids) if self.critical_sentence_ids is not None else None
            ),
        }

    @classmethod
    def from_record(cls, obj: dict) -> TraceRecord:
        if not isinstance(obj, dict) or not isinstance(obj.get("query_id"), str) or not isinstance(
            obj.get("text"), str
        ):
            raise ValueError("trace record needs string query_id and text")
        rel = obj.get("relevant_doc_ids")
        crit = obj.get("critical_sentence_ids")
        return cls(
            obj["query_id"],
            obj["text"],
            tuple(rel) if rel is not None else None,
            tuple(crit) if crit is not None else None,
        )


@dataclass(frozen=True)
class GroundTruth:
    query_id: str
    answer_tokens: tuple[str, ...]
    critical_sentence_ids: tuple[str, ...]
    source_doc_ids: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "answer_tokens": list(self.answer_tokens),
            "critical_sentence_ids": list(self.critical_sentence_ids),
            "source_doc_ids": list(self.source_doc_ids),
        }


@dataclass
class SyntheticCorpus:
    spec: CorpusSpec
    documents: list[Document]
    withheld: list[Document]
    trace: list[TraceRecord]
    ground_truth: list[GroundTruth]
    # sentence node id -> answer token, for every planted critical sentence
    critical: dict[str, str] = field(default_factory=dict)
    vocabularies: dict[str, list[str]] = field(default_factory=dict)

    @property
    def all_documents(self) -> list[Document]:
        return self.documents + self.withheld

    def critical_in(self, doc_ids) -> dict[str, str]:
        wanted = set(doc_ids)
        return {sid: tok for sid, tok in self.critical.items() if sid.split("/")[0] in wanted}

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out / "corpus.jsonl",
            "withheld": out / "withheld.jsonl",
            "trace": out / "trace.jsonl",
            "ground_truth": out / "ground_truth.jsonl",
        }
        write_documents(self.documents, paths["corpus"])
        write_documents(self.withheld, paths["withheld"])
        _write_jsonl(paths["trace"], (t.to_record() for t in self.trace))
        _write_jsonl(paths["ground_truth"], (g.to_record() for g in self.ground_truth))
        return paths


def _write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


class _WordFactory:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: set[str] = set()

    def word(self, syllables: int = 2, prefix: str = "") -> str:
        while True:
            parts = [
                _ONSETS[self.rng.integers(len(_ONSETS))]
                + _VOWELS[self.rng.integers(len(_VOWELS))]
                + _CODAS[self.rng.integers(len(_CODAS))]
                for _ in range(syllables)
            ]
            w = prefix + "".join(parts)
            if w not in self.used:
                self.used.add(w)
                return w

    def vocab(self, n: int, syllables: int = 2) -> list[str]:
        return [self.word(syllables) for _ in range(n)]


def _sentence(words: list[str]) -> str:
    return " ".join([words[0].capitalize()] + words[1:]) + "."


def generate(spec: CorpusSpec) -> SyntheticCorpus:
    rng = np.random.default_rng(spec.seed)
    words = _WordFactory(rng)
    shared = words.vocab(spec.shared_vocab, syllables=2)
    n_all = spec.n_topics + spec.withheld_topics
    topic_vocab = [words.vocab(spec.vocab_per_topic, syllables=3) for _ in range(n_all)]

    critical: dict[str, str] = {}
    docs_by_group: dict[bool, list[Document]] = {False: [], True: []}
    for t in range(n_all):
        withheld = t >= spec.n_topics
        topic_name = f"{'w' if withheld else 't'}{t}"
        vocab = topic_vocab[t]
        for d in range(spec.docs_per_topic):
            doc_id = f"{topic_name}-d{d}"
            crit_pos = set(rng.choice(spec.sentences_per_doc, size=spec.critical_per_doc, replace=False).tolist())
            sentences, answers = [], {}
            for i in range(spec.sentences_per_doc):
                if i in crit_pos:
                    k = min(spec.critical_len, len(vocab))
                    body = [vocab[j] for j in rng.choice(len(vocab), size=k, replace=False)]
                    answer = words.word(syllables=2, prefix="q")
                    body.insert(int(rng.integers(len(body) + 1)), answer)
                    answers[i] = answer
                else:
                    n_topic = min(spec.filler_topic_tokens, spec.filler_len)
                    pool = shared if shared else vocab
                    body = [pool[j] for j in rng.integers(len(pool), size=spec.filler_len - n_topic)]
                    body += [vocab[j] for j in rng.integers(len(vocab), size=n_topic)]
                    rng.shuffle(body)
                sentences.append(_sentence(body))
            paragraphs = [
                sentences[i : i + spec.sentences_per_paragraph]
                for i in range(0, len(sentences), spec.sentences_per_paragraph)
            ]
            text = "\n\n".join(" ".join(p) for p in paragraphs)
            for i, answer in answers.items():
                p, s = divmod(i, spec.sentences_per_paragraph)
                critical[f"{doc_id}/p{p}/s{s}"] = answer
            docs_by_group[withheld].append(Document(doc_id, text, topic_name, 1))

    sentence_text = _sentence_texts(docs_by_group[False] + docs_by_group[True])
    cached_crit = sorted(s for s in critical if not s.startswith("w"))
    withheld_crit = sorted(s for s in critical if s.startswith("w"))
    if spec.n_queries is None:
        plan = [(s, False) for s in cached_crit]
    else:
        n_miss = int(round(spec.n_queries * spec.miss_fraction))
        n_hit = spec.n_queries - n_miss
        plan = [(s, False) for s in _draw(rng, cached_crit, n_hit)]
        plan += [(s, True) for s in _draw(rng, withheld_crit, n_miss)]
        order = rng.permutation(len(plan))
        plan = [plan[i] for i in order]

    trace, truth = [], []
    for qi, (sid, _miss) in enumerate(plan):
        qid = f"q{qi:04d}"
        doc_id = sid.split("/")[0]
        toks = tokenize(sentence_text[sid])
        rng.shuffle(toks)
        trace.append(TraceRecord(qid, " ".join(toks) + "?", (doc_id,), (sid,)))
        truth.append(GroundTruth(qid, (critical[sid],), (sid,), (doc_id,)))

    vocabularies = {"shared": shared}
    for t, v in enumerate(topic_vocab):
        vocabularies[f"{'w' if t >= spec.n_topics else 't'}{t}"] = v
    return SyntheticCorpus(
        spec, docs_by_group[False], docs_by_group[True], trace, truth, critical, vocabularies
    )


def _draw(rng: np.random.Generator, pool: list[str], n: int) -> list[str]:
    if n == 0:
        return []
    if not pool:
        raise ValueError("no critical sentences available to build queries from")
    if n <= len(pool):
        return [pool[i] for i in sorted(rng.choice(len(pool), size=n, replace=False).tolist())]
    return [pool[i] for i in rng.integers(len(pool), size=n)]


def _sentence_texts(docs: list[Document]) -> dict[str, str]:
    from .corpus import segment_document

    out = {}
    for doc in docs:
        for node in segment_document(doc).sentences():
            out[node.node_id] = node.text
    return out


def topic_collision_rate(corpus: SyntheticCorpus) -> float:
    """Fraction of cross-topic token pairs that hash to the same bucket."""
    topics = [v for k, v in corpus.vocabularies.items() if k != "shared"]
    pairs = clashes = 0
    for a, b in combinations(topics, 2):
        ba = [token_bucket(w) for w in a]
        bb = [token_bucket(w) for w in b]
        for x in ba:
            for y in bb:
                pairs += 1
                clashes += x == y
    return clashes / pairs if pairs else 0.0


def spec_dict(spec: CorpusSpec) -> dict:
    return asdict(spec)
