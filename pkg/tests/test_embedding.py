import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_difference, count_vocab, relative_error
from vulnlearn.embedding import (EmbeddingModel, Vocabulary, bow_vector, build_vocab, char_ngrams,
                                 compose_file_vector, fnv1a_64, idf, sgns_loss_and_grads,
                                 subword_pair_loss_and_grads, tfidf_weight, train_fasttext,
                                 train_word2vec)

streams = st.lists(st.lists(st.sampled_from(list("abcdefgh")), max_size=20), max_size=50)


def _cos(u, v):
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def test_vocab_threshold():
    assert build_vocab([["a", "b", "a"]], min_count=2).tokens == ["a"]
    assert build_vocab([["a", "b", "a"]], min_count=1).tokens == ["a", "b"]


def test_vocab_empty_corpus_is_valid():
    v = build_vocab([])
    assert len(v) == 0 and v.n_documents == 0


@given(streams, st.integers(1, 4))
def test_vocab_matches_count_oracle(corpus, min_count):
    v = build_vocab(corpus, min_count)
    assert set(v.tokens) == count_vocab(corpus, min_count)
    assert sorted(v.index.values()) == list(range(len(v)))
    assert v.tokens == sorted(v.tokens)


def test_bow_examples():
    v = build_vocab([["a", "b"]])
    assert bow_vector(["a", "b", "a"], v).tolist() == [2.0, 1.0]
    assert bow_vector([], v).tolist() == [0.0, 0.0]


@given(streams, streams)
def test_bow_matches_dict_count(train, docs):
    v = build_vocab(train)
    for doc in docs:
        vec = bow_vector(doc, v)
        assert len(vec) == len(v)
        for tok, i in v.index.items():
            assert vec[i] == doc.count(tok)
        assert vec.sum() == sum(1 for t in doc if t in v)


def test_idf_examples():
    uniform = build_vocab([["t"]] * 10)
    assert idf(uniform)[0] == pytest.approx(1.0)
    rare = build_vocab([["t"]] + [["u"]] * 9)
    assert tfidf_weight(rare, 10, "t") == pytest.approx(math.log(11 / 2) + 1, abs=1e-12)
    assert tfidf_weight(rare, 10, "t") == pytest.approx(2.7047, abs=1e-4)


def test_tfidf_unknown_token():
    with pytest.raises(KeyError):
        tfidf_weight(build_vocab([["a"]]), 1, "zzz")


@given(streams)
def test_idf_weights_positive(corpus):
    assert np.all(idf(build_vocab(corpus)) >= 1.0)


def _gradcheck_sgns(rng, dim=8, k=4):
    center = rng.normal(size=dim)
    context = rng.normal(size=dim)
    negs = rng.normal(size=(k, dim))
    _, dc, dx, dn = sgns_loss_and_grads(center, context, negs)
    f = lambda: sgns_loss_and_grads(center, context, negs)[0]
    errs = []
    for arr, grad in ((center, dc), (context, dx), (negs, dn)):
        for _ in range(4):
            idx = tuple(int(rng.integers(s)) for s in arr.shape)
            errs.append(relative_error(central_difference(f, arr, idx), grad[idx]))
    return max(errs)


def test_sgns_gradient_check():
    assert _gradcheck_sgns(np.random.default_rng(0)) <= 1e-4


def test_subword_gradient_check():
    rng = np.random.default_rng(1)
    dim = 6
    own, subs = rng.normal(size=dim), rng.normal(size=(3, dim))
    ctx, negs = rng.normal(size=dim), rng.normal(size=(5, dim))
    _, d_own, d_subs, d_ctx, d_neg = subword_pair_loss_and_grads(own, subs, ctx, negs)
    f = lambda: subword_pair_loss_and_grads(own, subs, ctx, negs)[0]
    for arr, grad in ((own, d_own), (subs, d_subs), (ctx, d_ctx), (negs, d_neg)):
        for _ in range(3):
            idx = tuple(int(rng.integers(s)) for s in arr.shape)
            assert relative_error(central_difference(f, arr, idx), grad[idx]) <= 1e-4


def _toy_corpus():
    # "a" and "b" always appear with x/y, "z" only with p/q
    docs = []
    for i in range(40):
        docs.append(["x", "a", "y", "x", "b", "y"] if i % 2 else ["y", "b", "x", "y", "a", "x"])
        docs.append(["p", "z", "q", "q", "z", "p"])
    return docs


@pytest.mark.parametrize("seed", range(5))
def test_word2vec_shared_contexts(seed):
    m = train_word2vec(_toy_corpus(), dim=16, window=2, min_count=1, epochs=10, seed=seed)
    a, b, z = m.vector("a"), m.vector("b"), m.vector("z")
    assert _cos(a, b) > _cos(a, z)


def test_word2vec_single_token_corpus():
    m = train_word2vec([["only"]], dim=5, min_count=1, epochs=2)
    assert np.all(np.isfinite(m.vector("only")))


@pytest.mark.parametrize("seed", range(3))
def test_word2vec_loss_non_increasing(seed):
    m = train_word2vec(_toy_corpus(), dim=16, window=2, min_count=1, epochs=5, seed=seed)
    h = m.loss_history
    assert len(h) == 5
    assert all(b <= a for a, b in zip(h, h[1:])), h


@pytest.mark.parametrize("seed", range(3))
def test_fasttext_loss_non_increasing(seed):
    m = train_fasttext(_toy_corpus(), dim=16, window=2, min_count=1, epochs=5, seed=seed,
                       buckets=256)
    h = m.loss_history
    assert all(b <= a for a, b in zip(h, h[1:])), h


def test_embedding_determinism():
    a = train_word2vec(_toy_corpus(), dim=8, min_count=1, epochs=2, seed=3)
    b = train_word2vec(_toy_corpus(), dim=8, min_count=1, epochs=2, seed=3)
    assert np.array_equal(a.vectors, b.vectors)
    c = train_fasttext(_toy_corpus(), dim=8, min_count=1, epochs=2, seed=3, buckets=64)
    d = train_fasttext(_toy_corpus(), dim=8, min_count=1, epochs=2, seed=3, buckets=64)
    assert np.array_equal(c.vectors, d.vectors)
    assert np.array_equal(c.subword_vectors, d.subword_vectors)


@pytest.mark.parametrize("bad", [dict(dim=0), dict(window=0), dict(dim=-3)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        train_word2vec(_toy_corpus(), min_count=1, **bad)
    with pytest.raises(ValueError):
        train_fasttext(_toy_corpus(), min_count=1, **bad)


def test_fnv1a_reference_values():
    # published FNV-1a 64-bit test vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_char_ngrams():
    grams = char_ngrams("abcd", 3, 6)
    assert "<ab" in grams and "cd>" in grams and "<abcd>" in grams
    assert char_ngrams("a", 3, 6) == ["<a>"]


def test_fasttext_oov_shares_ngrams():
    token = "abc" * 4
    oov = "abc" * 5
    assert set(char_ngrams(oov)) == set(char_ngrams(token))
    corpus = [["pre", token, "post", "x"], ["x", "pre", token, "post"]] * 20
    m = train_fasttext(corpus, dim=16, window=2, min_count=1, epochs=5, seed=0)
    assert oov not in m.vocab
    assert _cos(m.vector(oov), m.vector(token)) > 0.9


def test_fasttext_short_token_vector():
    m = train_fasttext([["ab", "cd"] * 5], dim=4, min_count=1, epochs=1, seed=0, buckets=32)
    (gid,) = m.ngram_ids("ab")
    own = m.vectors[m.vocab.index["ab"]]
    assert np.allclose(m.vector("ab"), (own + m.subword_vectors[gid]) / 2)


def _fixed_model(vectors: dict[str, np.ndarray], docs):
    vocab = build_vocab(docs)
    mat = np.vstack([vectors[t] for t in vocab.tokens])
    return EmbeddingModel("word2vec", vocab, mat, window=5, negatives=5)


def test_compose_singleton_and_cancellation():
    v = np.array([1.0, 2.0, -3.0])
    m = _fixed_model({"a": v, "b": -v}, [["a", "b"]])
    assert np.allclose(compose_file_vector(["a"], m), v)
    assert np.allclose(compose_file_vector(["a", "b"], m), 0.0)
    assert np.array_equal(compose_file_vector([], m), np.zeros(3))
    assert np.array_equal(compose_file_vector(["unknown"], m), np.zeros(3))


@given(streams.filter(lambda c: any(c)), st.lists(st.sampled_from(list("abcdefghij")), max_size=30),
       st.randoms(use_true_random=False))
@settings(max_examples=60)
def test_compose_matches_two_pass_oracle(corpus, doc, rnd):
    vocab = build_vocab(corpus)
    rng = np.random.default_rng(rnd.randrange(2 ** 32))
    vecs = {t: rng.normal(size=4) for t in vocab.tokens}
    m = _fixed_model(vecs, corpus)
    n = len(corpus)
    acc, total = np.zeros(4), 0.0
    for tok in set(doc):
        if tok in vocab:
            w = tfidf_weight(vocab, n, tok, tf=doc.count(tok))
            acc += w * vecs[tok]
            total += w
    expected = acc / total if total else acc
    got = compose_file_vector(doc, m)
    assert np.allclose(got, expected, atol=1e-12)
    shuffled = list(doc)
    rnd.shuffle(shuffled)
    assert np.array_equal(compose_file_vector(shuffled, m), got)


def test_model_round_trip(tmp_path):
    for m in (train_word2vec(_toy_corpus(), dim=6, min_count=1, epochs=1),
              train_fasttext(_toy_corpus(), dim=6, min_count=1, epochs=1, buckets=32)):
        path = tmp_path / f"{m.kind.value}.txt"
        m.save(path)
        back = EmbeddingModel.load(path)
        assert back.kind == m.kind and back.vocab.tokens == m.vocab.tokens
        assert np.array_equal(back.vectors, m.vectors)
        assert np.array_equal(back.vector("a"), m.vector("a"))
        if m.kind.value == "fasttext":
            assert np.array_equal(back.vector("never_seen"), m.vector("never_seen"))


def test_vocab_round_trip(tmp_path):
    v = build_vocab(_toy_corpus(), min_count=2)
    v.save(tmp_path / "v.tsv")
    back = Vocabulary.load(tmp_path / "v.tsv")
    assert back.index == v.index and back.n_documents == v.n_documents
    assert np.array_equal(back.doc_freq, v.doc_freq)
