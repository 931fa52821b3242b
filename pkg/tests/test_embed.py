import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxforge.embed import DIM, VectorIndex, cosine, embed_text, fnv1a_64, index_topm, token_bucket

import oracles

texts = st.text(alphabet="abcdefg hij.,", max_size=60)


def test_fnv_reference_vectors():
    # published FNV-1a 64-bit vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C


def test_empty_text_is_zero_vector():
    v = embed_text("")
    assert v.shape == (DIM,) and not v.any()


@given(texts)
def test_embedding_matches_oracle_and_is_unit_or_zero(text):
    v = embed_text(text)
    assert np.allclose(v, oracles.embed(text), atol=1e-12)
    n = np.linalg.norm(v)
    assert abs(n - 1.0) <= 1e-9 or n == 0.0
    if oracles.tokens(text):
        assert cosine(v, embed_text(text)) == pytest.approx(1.0, abs=1e-12)


def test_disjoint_buckets_give_zero_cosine():
    # buckets computed by the oracle: alpha 43, beta 167, gamma 106, delta 193
    assert [oracles.fnv1a64(t) % DIM for t in ("alpha", "beta", "gamma", "delta")] == [43, 167, 106, 193]
    assert [token_bucket(t) for t in ("alpha", "beta", "gamma", "delta")] == [43, 167, 106, 193]
    assert cosine(embed_text("alpha beta"), embed_text("gamma delta")) == 0.0


def test_term_frequency_weighting():
    v = embed_text("alpha alpha beta")
    w = np.zeros(DIM)
    w[43], w[167] = np.log(3.0), np.log(2.0)
    assert np.allclose(v, w / np.linalg.norm(w))


def test_embeddings_are_read_only():
    v = embed_text("alpha")
    with pytest.raises(ValueError):
        v[0] = 1.0


def test_cosine_examples():
    e1, e2 = np.eye(DIM)[0], np.eye(DIM)[1]
    assert cosine(e1, e1) == 1.0
    assert cosine(e1, e2) == 0.0
    assert cosine(e1, np.zeros(DIM)) == 0.0
    with pytest.raises(ValueError):
        cosine(np.ones(3), np.ones(4))


@given(texts, texts)
def test_cosine_symmetric_and_bounded(a, b):
    va, vb = embed_text(a), embed_text(b)
    assert cosine(va, vb) == cosine(vb, va)
    assert -1.0 <= cosine(va, vb) <= 1.0
    assert cosine(va, vb) == pytest.approx(oracles.cos(list(va), list(vb)), abs=1e-12)


def test_index_topm_examples():
    q = embed_text("alpha")
    one = VectorIndex([("only", embed_text("beta"))])
    assert [d for d, _ in index_topm(one, q, 5)] == ["only"]
    idx = VectorIndex([("orth", embed_text("gamma")), ("same", embed_text("alpha"))])
    assert index_topm(idx, q, 1) == [("same", 1.0)]
    assert index_topm(VectorIndex(), q, 3) == []
    with pytest.raises(ValueError):
        index_topm(idx, q, 0)


def test_index_topm_matches_sort_oracle():
    rng = np.random.default_rng(7)
    for trial in range(20):
        vecs = rng.normal(size=(20, DIM))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        idx = VectorIndex((f"d{i:02d}", v) for i, v in enumerate(vecs))
        q = rng.normal(size=DIM)
        scored = [(f"d{i:02d}", oracles.cos(list(v), list(q))) for i, v in enumerate(vecs)]
        expect = sorted(scored, key=lambda t: (-t[1], t[0]))
        got = index_topm(idx, q, 5)
        assert [d for d, _ in got] == [d for d, _ in expect[:5]]
        full = index_topm(idx, q, len(idx))
        assert [d for d, _ in full] == [d for d, _ in expect]


def test_index_ties_break_by_doc_id():
    v = embed_text("alpha")
    idx = VectorIndex([("b", v), ("a", v), ("c", v)])
    assert [d for d, _ in index_topm(idx, v, 2)] == ["a", "b"]


def test_index_mutation():
    idx = VectorIndex.from_texts([("a", "alpha"), ("b", "beta")])
    with pytest.raises(ValueError):
        idx.add("a", embed_text("x"))
    idx.replace("a", embed_text("beta"))
    idx.remove("b")
    assert [d for d, _ in idx.entries] == ["a"]
    assert index_topm(idx, embed_text("beta"), 1)[0][1] == pytest.approx(1.0)
