"""Bag-of-words, word2vec and fastText file vectors."""
import numpy as np

from vulnlearn.embedding import (bow_vector, build_vocab, char_ngrams, compose_file_vector,
                                 train_fasttext, train_word2vec)

rng = np.random.default_rng(0)
# two families of tokens that never share a context
a = ["query", "sql", "statement", "execute"]
b = ["button", "layout", "view", "color"]
corpus = [list(rng.choice(a if i % 2 else b, size=30)) for i in range(60)]

vocab = build_vocab(corpus, min_count=1)
print([str(t) for t in vocab.tokens])
print(bow_vector(["sql", "sql", "view", "unknown"], vocab))

w2v = train_word2vec(corpus, dim=16, min_count=1, epochs=5, seed=0)
print("loss per epoch", np.round(w2v.loss_history, 4))


def cos(u, v):
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


# same-family tokens end up closer than cross-family ones
print("sql~query", round(cos(w2v.vector("sql"), w2v.vector("query")), 3))
print("sql~button", round(cos(w2v.vector("sql"), w2v.vector("button")), 3))

# fastText builds vectors from character n-grams, so unseen words still get one
ft = train_fasttext(corpus, dim=16, min_count=1, epochs=5, seed=0)
print(char_ngrams("sql", 3, 4))
print("sqlx~sql", round(cos(ft.vector("sqlx"), ft.vector("sql")), 3))

# a file vector is the tf-idf weighted mean of its token vectors
print(np.round(compose_file_vector(["sql", "execute", "sql"], w2v)[:4], 3))
