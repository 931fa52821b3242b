"""Segmented, token-budgeted cache store."""

from .build import (
    ChangeEvent,
    ChangeOp,
    StaleChangeError,
    apply_change,
    build_cache,
    evict,
    load_segments_for_query,
    rank_segments,
    read_changes,
)
from .segments import CacheEntry, CacheSegment, EvictionError, choose_evictions, cluster_segments, eviction_order
from .snapshot import CacheSnapshot
from .truncate import STOPWORDS, idf_table, truncate_tokens

__all__ = [
    "CacheEntry",
    "CacheSegment",
    "CacheSnapshot",
    "ChangeEvent",
    "ChangeOp",
    "EvictionError",
    "STOPWORDS",
    "StaleChangeError",
    "apply_change",
    "build_cache",
    "choose_evictions",
    "cluster_segments",
    "evict",
    "eviction_order",
    "idf_table",
    "load_segments_for_query",
    "rank_segments",
    "read_changes",
    "truncate_tokens",
]
