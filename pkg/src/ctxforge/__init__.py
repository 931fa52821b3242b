"""ctxforge: a token-budgeted context cache with retrieval on cache misses.

Typical use::

    store = ingest_corpus("corpus.jsonl")
    snapshot = build_cache(store, EngineConfig(token_budget=1024))
    engine = Engine(snapshot)
    context, metrics = engine.answer("what is the boiling point?")
"""

from .cache import CacheSnapshot, ChangeEvent, apply_change, build_cache, evict, load_segments_for_query
from .config import EngineConfig, PolicyMode
from .corpus import CorpusError, CorpusStore, Document, ingest_corpus, segment_document, tokenize
from .embed import VectorIndex, cosine, embed_text, index_topm
from .hybrid import AssembledContext, Engine, HybridConfig, answer_context, augment, detect_cache_hit, distill_query
from .rank import PriorMode, QueryBuffer, snippet_score
from .summarize import resolve_context
from .syncorpus import CorpusSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AssembledContext",
    "CacheSnapshot",
    "ChangeEvent",
    "CorpusError",
    "CorpusSpec",
    "CorpusStore",
    "Document",
    "Engine",
    "EngineConfig",
    "HybridConfig",
    "PolicyMode",
    "PriorMode",
    "QueryBuffer",
    "VectorIndex",
    "answer_context",
    "apply_change",
    "augment",
    "build_cache",
    "cosine",
    "detect_cache_hit",
    "distill_query",
    "embed_text",
    "evict",
    "generate",
    "index_topm",
    "ingest_corpus",
    "load_segments_for_query",
    "resolve_context",
    "segment_document",
    "snippet_score",
    "tokenize",
]
