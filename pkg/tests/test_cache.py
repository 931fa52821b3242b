import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxforge.cache import (
    CacheEntry,
    CacheSnapshot,
    ChangeEvent,
    ChangeOp,
    EvictionError,
    StaleChangeError,
    apply_change,
    build_cache,
    choose_evictions,
    cluster_segments,
    evict,
    idf_table,

    load_segments_for_query,
    truncate_tokens,
)
from ctxforge.config import EngineConfig
from ctxforge.corpus import CorpusStore, Document, count_tokens
from ctxforge.embed import embed_text
from ctxforge.syncorpus import CorpusSpec, generate

from ctxforge.cache.segments import kmeans

import oracles


def entry(nid, text="alpha beta", score=0.5, doc="d"):
    return CacheEntry(nid, text, count_tokens(text), score, doc, 1)


# truncation ---------------------------------------------------------------


def test_truncate_keeps_rare_tokens_in_order():
    idf = idf_table(["alpha beta gamma", "alpha beta", "alpha"])
    out = truncate_tokens("The alpha gamma beta of", 0.6, idf)
    assert out == "alpha gamma beta"


def test_truncate_full_fraction_is_identity():
    assert truncate_tokens("Hello, World!", 1.0, {}) == "Hello, World!"


def test_truncate_stopwords_rank_last():
    assert truncate_tokens("the the the cache", 0.25, {"cache": 1.0}) == "cache"


@pytest.mark.parametrize("keep", [0.8, 0.85, 0.9])
def test_truncate_reduction_band(keep):
    words = [f"tok{i}" for i in range(20)]
    idf = {w: 1.0 + i / 10 for i, w in enumerate(words)}
    out = truncate_tokens(" ".join(words), keep, idf)
    assert 2 <= 20 - count_tokens(out) <= 4


def test_truncate_corpus_reduction_at_default(standard_store):
    idf = idf_table(d.text for d in standard_store.documents.values())
    before = after = 0
    for doc in standard_store.documents.values():
        for node in standard_store.hierarchy(doc.doc_id).sentences():
            before += count_tokens(node.text)
            after += count_tokens(truncate_tokens(node.text, 0.85, idf))
    assert 0.10 <= 1 - after / before <= 0.20


def test_truncate_rejects_bad_fraction():
    with pytest.raises(ValueError):
        truncate_tokens("a b", 0.0, {})


# k-means -------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_kmeans_matches_reference(seed):
    rng = np.random.default_rng(100 + seed)
    centres = rng.normal(size=(3, 5)) * 4
    pts = np.concatenate([c + rng.normal(size=(7, 5)) for c in centres])
    got = kmeans(pts, 3, seed).tolist()
    assert got == oracles.kmeans_labels(pts.tolist(), 3, seed)


def test_cluster_segments_separates_topics():
    texts = {"a1": "apple pear plum", "a2": "apple plum pear fig", "b1": "bolt nut gear", "b2": "gear bolt washer"}
    labels = cluster_segments([(k, embed_text(v)) for k, v in texts.items()], 2, 0)
    assert labels["a1"] == labels["a2"] != labels["b1"] == labels["b2"]


def test_cluster_with_k_above_n_caps_at_n():
    labels = cluster_segments([("x", embed_text("one")), ("y", embed_text("two"))], 5, 0)
    assert sorted(set(labels.values())) == [0, 1]


def test_cluster_rejects_empty_and_bad_k():
    with pytest.raises(ValueError):
        cluster_segments([], 2, 0)
    with pytest.raises(ValueError):
        cluster_segments([("x", embed_text("one"))], 0, 0)


# eviction ------------------------------------------------------------------


def test_eviction_order_and_ties():
    es = [entry("a", score=0.2), entry("b", score=0.1), entry("c", score=0.2), entry("d", score=0.9)]
    assert [e.node_id for e in choose_evictions(es, 5)] == ["b", "c", "a"]
    assert choose_evictions(es, 0) == []


def test_eviction_respects_pins_and_reports_shortfall():
    es = [entry("a", score=0.1), entry("b", score=0.2)]
    assert [e.node_id for e in choose_evictions(es, 1, {"a"})] == ["b"]
    with pytest.raises(EvictionError) as err:
        choose_evictions(es, 3, {"a"})
    assert err.value.shortfall == 1


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 9), st.integers(0, 5)), min_size=1, max_size=12),
    st.integers(0, 60),
    st.sets(st.integers(0, 11), max_size=3),
)
def test_eviction_matches_reference(spec, need, pin_idx):
    words = ["w%d" % i for i in range(9)]
    es = [entry(f"n{i:02d}", " ".join(words[:n]), s / 5) for i, (n, s) in enumerate(spec)]
    pinned = {f"n{i:02d}" for i in pin_idx}
    want = oracles.evict_prefix([(e.node_id, e.token_count, e.score) for e in es], need, pinned)
    if want is None:
        with pytest.raises(EvictionError):
            choose_evictions(es, need, pinned)
    else:
        assert [e.node_id for e in choose_evictions(es, need, pinned)] == want


def test_evict_touches_loaded_segments_only(standard_snapshot):
    snap = standard_snapshot.copy()
    snap.segments[0].loaded = False
    frozen = snap.segments[0].to_bytes()
    new, gone = evict(snap, 20)
    assert gone and sum(e.token_count for e in snap.entries() if e.node_id in gone) >= 20
    assert new.segments[0].to_bytes() == frozen
    assert not set(gone) & {e.node_id for e in snap.segments[0].entries}
    assert snap.total_tokens() == standard_snapshot.total_tokens()  # input untouched


# loading -------------------------------------------------------------------


def test_load_segments_picks_nearest(standard_snapshot):
    snap = standard_snapshot.copy()
    seg = snap.segments[1]
    chosen = load_segments_for_query(snap, seg.centroid, 1)
    assert chosen == [seg.segment_id]
    assert [s.loaded for s in snap.segments] == [s.segment_id == seg.segment_id for s in snap.segments]
    with pytest.raises(ValueError):
        load_segments_for_query(snap, seg.centroid, 0)


# build and snapshot -------------------------------------------------------


def test_build_respects_budget_and_stats(standard_store):
    cfg = EngineConfig(token_budget=300, policy_mode="off")
    snap = build_cache(standard_store, cfg)
    assert snap.total_tokens() <= 300
    assert snap.stats["evicted_at_build"] > 0
    assert snap.stats["cached_tokens"] == snap.total_tokens()
    assert snap.k == cfg.resolve_k(len(standard_store))


def test_snapshot_round_trip_is_byte_identical(standard_snapshot, tmp_path):
    blob = standard_snapshot.save(tmp_path / "c.bin")
    again = CacheSnapshot.load(tmp_path / "c.bin")
    assert again.to_bytes() == blob
    assert again.config_digest == standard_snapshot.config_digest
    assert [e.node_id for e in again.entries()] == [e.node_id for e in standard_snapshot.entries()]


def test_snapshot_rejects_corruption(standard_snapshot):
    blob = bytearray(standard_snapshot.to_bytes())
    with pytest.raises(ValueError):
        CacheSnapshot.from_bytes(b"NOTCACHE!" + bytes(blob[9:]))
    with pytest.raises(ValueError):
        CacheSnapshot.from_bytes(bytes(blob) + b"\0")


def test_single_document_corpus():
    store = CorpusStore.from_documents([Document("solo", "One short sentence. Another one here.")])
    snap = build_cache(store)
    assert snap.k == 1 and snap.entries()
    assert CacheSnapshot.from_bytes(snap.to_bytes()).to_bytes() == snap.to_bytes()


# incremental updates ------------------------------------------------------


def _edit(store, doc_id, extra=" Freshly appended sentence here."):
    doc = store.get(doc_id)
    return ChangeEvent(ChangeOp.EDIT, doc_id, doc.version + 1, doc.text + extra)


def test_edit_is_local(standard_snapshot, standard_store):
    doc_id = sorted(standard_store)[3]
    before = {s.segment_id: s.to_bytes() for s in standard_snapshot.segments}
    holders = {s.segment_id for s in standard_snapshot.segments if any(e.source_doc_id == doc_id for e in s.entries)}
    new, log_ids = apply_change(standard_snapshot, _edit(standard_store, doc_id))
    assert log_ids and all(n.split("/")[0] == doc_id for n in log_ids)
    for seg in new.segments:
        if seg.segment_id not in holders and not any(e.source_doc_id == doc_id for e in seg.entries):
            assert seg.to_bytes() == before[seg.segment_id]
    assert new.corpus_version[doc_id] == standard_store.get(doc_id).version + 1


def test_edit_with_same_text_reproduces_entries(standard_snapshot, standard_store):
    doc_id = sorted(standard_store)[0]
    doc = standard_store.get(doc_id)
    new, _ = apply_change(standard_snapshot, ChangeEvent(ChangeOp.EDIT, doc_id, doc.version + 1, doc.text))
    strip = lambda snap: [(s.segment_id, [(e.node_id, e.text, e.score) for e in s.entries]) for s in snap.segments]
    assert strip(new) == strip(standard_snapshot)


def test_delete_and_add(standard_snapshot, standard_store):
    doc_id = sorted(standard_store)[0]
    doc = standard_store.get(doc_id)
    gone, log_ids = apply_change(standard_snapshot, ChangeEvent(ChangeOp.DELETE, doc_id, doc.version + 1))
    assert log_ids == [] and doc_id not in gone.corpus_version
    assert not any(e.source_doc_id == doc_id for e in gone.entries())
    back, log_ids = apply_change(gone, ChangeEvent(ChangeOp.ADD, doc_id, doc.version + 2, doc.text))
    assert log_ids and any(e.source_doc_id == doc_id for e in back.entries())


def test_stale_and_unknown_changes_rejected(standard_snapshot, standard_store):
    doc_id = sorted(standard_store)[0]
    v = standard_store.get(doc_id).version
    with pytest.raises(StaleChangeError):
        apply_change(standard_snapshot, ChangeEvent(ChangeOp.EDIT, doc_id, v, "x."))
    with pytest.raises(StaleChangeError):
        apply_change(standard_snapshot, ChangeEvent(ChangeOp.EDIT, "nope", 2, "x."))
    with pytest.raises(StaleChangeError):
        apply_change(standard_snapshot, ChangeEvent(ChangeOp.ADD, doc_id, v + 1, "x."))


def test_change_record_round_trip():
    ev = ChangeEvent(ChangeOp.EDIT, "d", 3, "Some text.", "t")
    assert ChangeEvent.from_record(ev.to_record()) == ev


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 50), st.integers(60, 900))
def test_build_never_exceeds_budget(seed, budget):
    corpus = generate(CorpusSpec(n_topics=2, docs_per_topic=3, sentences_per_doc=6, seed=seed))
    snap = build_cache(CorpusStore.from_documents(corpus.documents), EngineConfig(token_budget=budget))
    assert snap.total_tokens() <= budget
    assert math.isclose(snap.compression_ratio(), 1 - snap.total_tokens() / snap.original_tokens())
