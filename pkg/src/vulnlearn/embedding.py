"""Token embeddings and per-file feature composition.

Bag-of-words counts, skip-gram word2vec with negative sampling and a
fastText-style subword variant are trained from token streams. File vectors
for the dense models are tf-idf weighted means of token vectors.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tokenizer import TokenStream

FORMAT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class EmbeddingKind(str, enum.Enum):
    BOW = "bow"
    WORD2VEC = "word2vec"
    FASTTEXT = "fasttext"


def _tokens(stream) -> Sequence[str]:
    return stream.tokens if isinstance(stream, TokenStream) else stream


@dataclass
class Vocabulary:
    """Dense token index with corpus and document frequencies."""

    index: dict[str, int]
    counts: np.ndarray
    doc_freq: np.ndarray
    n_documents: int
    min_count: int = 1

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.n_documents} {self.min_count}\n")
            for tok in self.tokens:
                i = self.index[tok]
                fh.write(f"{tok}\t{int(self.counts[i])}\t{int(self.doc_freq[i])}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            n_docs, min_count = (int(v) for v in fh.readline().split())
            rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
        index = {r[0]: i for i, r in enumerate(rows)}
        counts = np.array([int(r[1]) for r in rows], dtype=np.int64)
        df = np.array([int(r[2]) for r in rows], dtype=np.int64)
        return cls(index, counts, df, n_docs, min_count)


def build_vocab(corpus: Iterable, min_count: int = 1) -> Vocabulary:
    """Keep tokens with corpus frequency >= ``min_count``, indexed lexicographically."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    freq: Counter = Counter()
    docs: Counter = Counter()
    n_docs = 0
    for stream in corpus:
        toks = _tokens(stream)
        freq.update(toks)
        docs.update(set(toks))
        n_docs += 1
    kept = sorted(t for t, c in freq.items() if c >= min_count)
    index = {t: i for i, t in enumerate(kept)}
    counts = np.array([freq[t] for t in kept], dtype=np.int64)
    df = np.array([docs[t] for t in kept], dtype=np.int64)
    return Vocabulary(index, counts, df, n_docs, min_count)


def bow_vector(stream, vocab: Vocabulary) -> np.ndarray:
    """Occurrence counts of vocabulary tokens; out-of-vocabulary tokens are ignored."""
    vec = np.zeros(len(vocab), dtype=np.float64)
    for tok in _tokens(stream):
        i = vocab.index.get(tok)
        if i is not None:
            vec[i] += 1.0
    return vec


def idf(vocab: Vocabulary, n_documents: int | None = None) -> np.ndarray:
    """Smoothed inverse document frequency, ``ln((1 + n) / (1 + df)) + 1``."""
    n = vocab.n_documents if n_documents is None else n_documents
    return np.log((1.0 + n) / (1.0 + vocab.doc_freq)) + 1.0


def tfidf_weight(vocab: Vocabulary, n_documents: int, token: str, tf: float = 1.0) -> float:
    try:
        i = vocab.index[token]
    except KeyError:
        raise KeyError(f"token {token!r} is not in the vocabulary") from None
    return tf * (math.log((1.0 + n_documents) / (1.0 + vocab.doc_freq[i])) + 1.0)


# ---------------------------------------------------------------------------
# skip-gram with negative sampling


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sgns_loss_and_grads(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Negative-sampling loss for one (center, context) pair.

    ``loss = -log s(context . center) - sum_k log s(-negatives[k] . center)``

    Returns
    -------
    loss, d_center, d_context, d_negatives
    """
    pos = context @ center
    neg = negatives @ center
    loss = -_log_sigmoid(pos) - np.sum(_log_sigmoid(-neg))
    g_pos = _sigmoid(pos) - 1.0
    g_neg = _sigmoid(neg)
    d_center = g_pos * context + g_neg @ negatives
    d_context = g_pos * center
    d_negatives = np.outer(g_neg, center)
    return float(loss), d_center, d_context, d_negatives


def subword_pair_loss_and_grads(own: np.ndarray, subwords: np.ndarray,
                                context: np.ndarray, negatives: np.ndarray):
    """Pair loss when the center is the mean of its own and n-gram vectors.

    Returns ``loss, d_own, d_subwords, d_context, d_negatives``.
    """
    k = subwords.shape[0] + 1
    h = (own + subwords.sum(axis=0)) / k
    loss, d_h, d_ctx, d_neg = sgns_loss_and_grads(h, context, negatives)
    share = d_h / k
    return loss, share, np.tile(share, (k - 1, 1)), d_ctx, d_neg


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def char_ngrams(token: str, ngram_min: int = 3, ngram_max: int = 6) -> list[str]:
    """Character n-grams of ``<token>``.

    A token shorter than ``ngram_min`` contributes only its framed form.
    """
    framed = f"<{token}>"
    if len(token) < ngram_min:
        return [framed]
    grams = []
    for n in range(ngram_min, ngram_max + 1):
        for i in range(len(framed) - n + 1):
            grams.append(framed[i:i + n])
    return grams


@dataclass
class EmbeddingModel:
    kind: EmbeddingKind
    vocab: Vocabulary
    vectors: np.ndarray
    window: int = 5
    negatives: int = 5
    ngram_min: int = 3
    ngram_max: int = 6
    subword_vectors: np.ndarray | None = None
    loss_history: list[float] = field(default_factory=list)
    _ngram_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def buckets(self) -> int:
        return 0 if self.subword_vectors is None else self.subword_vectors.shape[0]

    def ngram_ids(self, token: str) -> np.ndarray:
        ids = self._ngram_cache.get(token)
        if ids is None:
            grams = char_ngrams(token, self.ngram_min, self.ngram_max)
            ids = np.array([fnv1a_64(g.encode("utf-8")) % self.buckets for g in grams],
                           dtype=np.int64)
            self._ngram_cache[token] = ids
        return ids

    def vector(self, token: str) -> np.ndarray:
        """Vector for ``token``; fastText models also cover unseen tokens."""
        i = self.vocab.index.get(token)
        if self.kind is EmbeddingKind.FASTTEXT:
            ids = self.ngram_ids(token)
            total = self.subword_vectors[ids].sum(axis=0)
            if i is None:
                return total / len(ids)
            return (total + self.vectors[i]) / (len(ids) + 1)
        if i is None:
            raise KeyError(f"token {token!r} is not in the vocabulary")
        return self.vectors[i].copy()

    def __contains__(self, token: str) -> bool:
        return token in self.vocab or self.kind is EmbeddingKind.FASTTEXT

    def save(self, path: str | Path) -> None:
        """Text format: header ``kind dim window min_count`` then ``token<TAB>v1 ... vd``.

        fastText models append ``ngram_min ngram_max buckets`` to the header
        and a ``[subwords]`` section of ``bucket<TAB>values`` lines. Floats are
        written with ``repr`` so loading reproduces them exactly.
        """
        head = [self.kind.value, str(self.dim), str(self.window), str(self.vocab.min_count)]
        if self.kind is EmbeddingKind.FASTTEXT:
            head += [str(self.ngram_min), str(self.ngram_max), str(self.buckets)]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#vulnlearn-embedding v{FORMAT_VERSION}\n")
            fh.write(" ".join(head) + "\n")
            for tok in self.vocab.tokens:
                fh.write(tok + "\t" + " ".join(map(repr, self.vectors[self.vocab.index[tok]].tolist())) + "\n")
            if self.kind is EmbeddingKind.FASTTEXT:
                fh.write("[subwords]\n")
                for b, row in enumerate(self.subword_vectors.tolist()):
                    fh.write(f"{b}\t" + " ".join(map(repr, row)) + "\n")

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary | None = None) -> "EmbeddingModel":
        """Inverse of :meth:`save`.

        Without ``vocab`` the document frequencies are unknown and a
        placeholder vocabulary (df = 1, one document) is attached.
        """
        with open(path, encoding="utf-8") as fh:
            magic = fh.readline().strip()
            if magic != f"#vulnlearn-embedding v{FORMAT_VERSION}":
                raise ValueError(f"unsupported embedding file header {magic!r}")
            head = fh.readline().split()
            kind = EmbeddingKind(head[0])
            dim, window, min_count = int(head[1]), int(head[2]), int(head[3])
            tokens, rows, sub_rows = [], [], []
            in_sub = False
            for line in fh:
                line = line.rstrip("\n")
                if line == "[subwords]":
                    in_sub = True
                    continue
                key, values = line.split("\t")
                vals = [float(v) for v in values.split()] if values else []
                (sub_rows if in_sub else rows).append(vals)
                if not in_sub:
                    tokens.append(key)
        vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
        if vocab is None:
            vocab = Vocabulary({t: i for i, t in enumerate(tokens)},
                               np.full(len(tokens), min_count, dtype=np.int64),
                               np.ones(len(tokens), dtype=np.int64), 1, min_count)
        elif vocab.tokens != tokens:
            raise ValueError("vocabulary does not match the embedding file")
        model = cls(kind, vocab, vectors, window=window)
        if kind is EmbeddingKind.FASTTEXT:
            model.ngram_min, model.ngram_max = int(head[4]), int(head[5])
            model.subword_vectors = np.array(sub_rows, dtype=np.float64).reshape(int(head[6]), dim)
        return model


def _check_params(dim: int, window: int, negatives: int, epochs: int) -> None:
    if dim <= 0:
        raise ValueError("dim must be positive")
    if window <= 0:
        raise ValueError("window must be positive")
    if negatives < 0 or epochs < 0:
        raise ValueError("negatives and epochs must be non-negative")


def _encode(corpus, vocab: Vocabulary) -> list[np.ndarray]:
    out = []
    for stream in corpus:
        ids = [vocab.index[t] for t in _tokens(stream) if t in vocab.index]
        if ids:
            out.append(np.array(ids, dtype=np.int64))
    return out


def _noise_distribution(vocab: Vocabulary) -> np.ndarray:
    p = vocab.counts.astype(np.float64) ** 0.75
    return np.cumsum(p / p.sum())


def _train_sgns(docs, vocab, dim, window, negatives, epochs, seed,
                lr_start, lr_end, subword_ids=None, buckets=0):
    rng = np.random.default_rng(seed)
    V = len(vocab)
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim))
    sub = (rng.random((buckets, dim)) - 0.5) / dim if subword_ids is not None else None
    noise_cdf = _noise_distribution(vocab)

    total_steps = max(1, epochs * sum(len(d) for d in docs))
    step = 0
    history = []
    for _ in range(epochs):
        epoch_loss, epoch_pairs = 0.0, 0
        for d in rng.permutation(len(docs)):
            ids = docs[d]
            n = len(ids)
            lrs = lr_start - (lr_start - lr_end) * (step + np.arange(n)) / total_steps
            step += n
            # one row of negatives per (center, context) slot, drawn up front
            draws = rng.random((n, 2 * window, negatives))
            neg_all = np.minimum(np.searchsorted(noise_cdf, draws, side="right"), V - 1)
            for pos in range(n):
                lo, hi = max(0, pos - window), min(n, pos + window + 1)
                if hi - lo < 2:
                    continue
                ctx = np.concatenate((ids[lo:pos], ids[pos + 1:hi]))
                c = ctx.size
                lr = lrs[pos]
                center = ids[pos]
                if sub is None:
                    h = w_in[center]
                else:
                    parts = subword_ids[center]
                    h = (w_in[center] + sub[parts].sum(axis=0)) / (len(parts) + 1)
                targets = np.empty((c, negatives + 1), dtype=np.int64)
                targets[:, 0] = ctx
                targets[:, 1:] = neg_all[pos, :c]
                u = w_out[targets]                       # (c, k+1, dim)
                score = u @ h                            # (c, k+1)
                score[:, 0] *= -1.0
                # loss = sum softplus(-sign * score); sign = +1 for the true context
                epoch_loss += float(np.logaddexp(0.0, score).sum())
                epoch_pairs += c
                g = _sigmoid(score)
                g[:, 0] *= -1.0                          # dloss/dscore
                d_h = np.tensordot(g, u, axes=2)
                np.add.at(w_out, targets, (-lr * g)[..., None] * h)
                if sub is None:
                    w_in[center] -= lr * d_h
                else:
                    share = d_h / (len(parts) + 1)
                    w_in[center] -= lr * share
                    np.add.at(sub, parts, -lr * share)
        history.append(epoch_loss / max(1, epoch_pairs))
    return w_in, sub, history


def train_word2vec(corpus, dim: int = 300, window: int = 5, min_count: int = 2,
                   negatives: int = 5, epochs: int = 5, seed: int = 0,
                   lr_start: float = 0.025, lr_end: float = 1e-4,
                   vocab: Vocabulary | None = None) -> EmbeddingModel:
    """Skip-gram word2vec trained with negative sampling.

    Training is sequential over center tokens with a linearly decaying
    learning rate, so identical inputs and ``seed`` give identical vectors.
    """
    _check_params(dim, window, negatives, epochs)
    corpus = list(corpus)
    vocab = build_vocab(corpus, min_count) if vocab is None else vocab
    if len(vocab) == 0:
        raise ValueError("corpus is empty after min_count filtering")
    docs = _encode(corpus, vocab)
    w_in, _, history = _train_sgns(docs, vocab, dim, window, negatives, epochs, seed,
                                   lr_start, lr_end)
    return EmbeddingModel(EmbeddingKind.WORD2VEC, vocab, w_in, window=window,
                          negatives=negatives, loss_history=history)


def train_fasttext(corpus, dim: int = 300, window: int = 5, min_count: int = 2,
                   ngram_min: int = 3, ngram_max: int = 6, buckets: int = 2 ** 12,
                   negatives: int = 5, epochs: int = 5, seed: int = 0,
                   lr_start: float = 0.025, lr_end: float = 1e-4,
                   vocab: Vocabulary | None = None) -> EmbeddingModel:
    """Skip-gram with hashed character n-gram subwords.

    A token's input representation is the mean of its own vector and the
    vectors of its n-gram buckets; tokens never seen in training are
    represented by their n-grams alone.
    """
    _check_params(dim, window, negatives, epochs)
    if not 1 <= ngram_min <= ngram_max:
        raise ValueError("need 1 <= ngram_min <= ngram_max")
    if buckets < 1:
        raise ValueError("buckets must be positive")
    corpus = list(corpus)
    vocab = build_vocab(corpus, min_count) if vocab is None else vocab
    if len(vocab) == 0:
        raise ValueError("corpus is empty after min_count filtering")
    model = EmbeddingModel(EmbeddingKind.FASTTEXT, vocab, np.zeros((len(vocab), dim)),
                           window=window, negatives=negatives, ngram_min=ngram_min,
                           ngram_max=ngram_max, subword_vectors=np.zeros((buckets, dim)))
    subword_ids = [model.ngram_ids(t) for t in vocab.tokens]
    docs = _encode(corpus, vocab)
    w_in, sub, history = _train_sgns(docs, vocab, dim, window, negatives, epochs, seed,
                                     lr_start, lr_end, subword_ids=subword_ids,
                                     buckets=buckets)
    model.vectors, model.subword_vectors, model.loss_history = w_in, sub, history
    return model


def compose_file_vector(stream, model: EmbeddingModel, vocab: Vocabulary | None = None,
                        idf_values: np.ndarray | None = None) -> np.ndarray:
    """tf-idf weighted mean of the in-vocabulary token vectors of one file.

    Returns the zero vector when no token is in the vocabulary.
    """
    vocab = model.vocab if vocab is None else vocab
    if idf_values is None:
        idf_values = idf(vocab)
    tf = Counter(t for t in _tokens(stream) if t in vocab.index)
    acc = np.zeros(model.dim)
    total = 0.0
    for tok in sorted(tf):
        w = tf[tok] * idf_values[vocab.index[tok]]
        acc += w * model.vector(tok)
        total += w
    if total == 0.0:
        return acc
    return acc / total
