"""
Apply a change feed to a built cache without rebuilding it.

An edit pushes only the edited document back through the pipeline; the
segments that never held it are left byte-for-byte unchanged.
"""
from ctxforge import CorpusStore, EngineConfig, build_cache
from ctxforge.cache import ChangeEvent, ChangeOp, StaleChangeError, apply_change
from ctxforge.syncorpus import CorpusSpec, generate


if __name__ == "__main__":
    corpus = generate(CorpusSpec(n_topics=4, docs_per_topic=10, seed=1))
    snap = build_cache(CorpusStore.from_documents(corpus.documents), EngineConfig(token_budget=4096))
    full = snap.stats["nodes_processed"]
    print(f"full build processed {full} nodes into {snap.k} segments")

    doc = snap.knowledge.get("t2-d3")
    before = {seg.segment_id: seg.to_bytes() for seg in snap.segments}
    snap, recomputed = apply_change(snap, ChangeEvent(ChangeOp.EDIT, doc.doc_id, doc.version + 1, doc.text + " A late addendum."))
    same = sum(seg.to_bytes() == before[seg.segment_id] for seg in snap.segments)
    print(f"edit of {doc.doc_id}: {len(recomputed)} nodes recompressed ({len(recomputed) / full:.1%} of a rebuild), "
          f"{same}/{snap.k} segments untouched")

    snap, recomputed = apply_change(snap, ChangeEvent(ChangeOp.DELETE, "t0-d0", 2))
    print(f"delete of t0-d0: recompute log {recomputed}, {len(snap.corpus_version)} docs cached")

    try:
        apply_change(snap, ChangeEvent(ChangeOp.EDIT, doc.doc_id, doc.version + 1, "replayed event"))
    except StaleChangeError as exc:
        print("replayed event rejected:", exc)
