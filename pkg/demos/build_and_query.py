"""
Build a context cache from a synthetic corpus and answer a few queries.

Shows the whole read path:
- compress every document into budgeted cache entries
- answer in-cache queries from the cache alone
- answer a query about a withheld topic by retrieving and summarizing
"""
from ctxforge import CorpusStore, EngineConfig, build_cache
from ctxforge.hybrid import Engine
from ctxforge.syncorpus import CorpusSpec, generate


if __name__ == "__main__":
    corpus = generate(CorpusSpec.standard(0, withheld_topics=1, n_queries=20, miss_fraction=0.5))
    store = CorpusStore.from_documents(corpus.documents)
    knowledge = CorpusStore.from_documents(corpus.all_documents)

    snap = build_cache(store, EngineConfig(token_budget=600), knowledge=knowledge)
    s = snap.stats
    print(f"{s['docs']} docs, {s['original_tokens']} tokens -> {s['cached_tokens']} cached "
          f"({s['compression_ratio']:.0%} smaller) in {s['segments']} segments")

    engine = Engine(snap)
    for rec in corpus.trace[:6]:
        ctx, m = engine.answer(rec.text, rec.query_id)
        kind = "hit " if m["hit"] else "miss"
        print(f"{rec.query_id} {kind} retrieved={m['retrieved']} evicted={m['evicted']} "
              f"context={m['context_tokens']} tokens, top entry {ctx.entries[0].node_id}")

    print("aggregates:", engine.stats())
