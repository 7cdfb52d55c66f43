"""Word-frequency reports and skip-gram word embeddings.

Embeddings are trained with negative sampling (unigram^0.75 noise) in a
single thread so that a fixed seed gives a bitwise-identical vector table.
The 2-D projection uses PCA on the selected word subset.
"""

import json
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"LMTE"
FORMAT_VERSION = 1


class AnalysisError(ValueError):
    pass


@dataclass
class FrequencyReport:
    ranked: list   # [(word, count)]
    direction: str


def frequency_report(tokens, k, direction="most"):
    """Top or bottom k words by count with lexicographic tie-break."""
    if k < 1:
        raise AnalysisError(f"k must be >= 1, got {k}")
    if direction not in ("most", "least"):
        raise AnalysisError(f"unknown direction {direction!r}")
    counts = Counter(tokens)
    if direction == "most":
        ranked = sorted(counts.items(), key=lambda wc: (-wc[1], wc[0]))
    else:
        ranked = sorted(counts.items(), key=lambda wc: (wc[1], wc[0]))
    return FrequencyReport(ranked=ranked[:k], direction=direction)


@dataclass
class EmbeddingModel:
    words: list
    vectors: np.ndarray          # |V| x d, float64
    dim: int
    window: int
    negatives: int
    epochs: int
    min_count: int
    seed: int
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.words)}

    def __contains__(self, word):
        return word in self.index

    def vector(self, word):
        if word not in self.index:
            raise AnalysisError(f"word {word!r} not in vocabulary")
        return self.vectors[self.index[word]]


def train_embeddings(sentences, dim=100, window=5, negatives=5, epochs=5,
                     min_count=1, seed=0, lr=0.025):
    """Skip-gram with negative sampling over tokenized sentences."""
    if dim < 2 or window < 1 or negatives < 1:
        raise AnalysisError("dim >= 2, window >= 1 and negatives >= 1 required")
    if not sentences:
        raise AnalysisError("no training sentences")

    counts = Counter(tok for sent in sentences for tok in sent)
    vocab = sorted((w for w, c in counts.items() if c >= min_count),
                   key=lambda w: (-counts[w], w))
    if not vocab:
        raise AnalysisError("effective vocabulary is empty (min_count too high?)")
    index = {w: i for i, w in enumerate(vocab)}

    rng = np.random.default_rng(seed)
    n = len(vocab)
    W = (rng.random((n, dim)) - 0.5) / dim       # input vectors
    C = np.zeros((n, dim))                       # context vectors

    noise = np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    encoded = [[index[t] for t in sent if t in index] for sent in sentences]
    encoded = [s for s in encoded if s]
    total_centers = sum(len(s) for s in encoded) * epochs
    seen = 0
    min_lr = lr * 1e-4

    for _ in range(epochs):
        for sent in encoded:
            for pos, center in enumerate(sent):
                alpha = max(min_lr, lr * (1.0 - seen / total_centers))
                seen += 1
                lo = max(0, pos - window)
                hi = min(len(sent), pos + window + 1)
                h = W[center]
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    targets = [sent[cpos]]
                    labels = [1.0]
                    draws = np.minimum(np.searchsorted(noise_cdf, rng.random(negatives)),
                                       n - 1)
                    for neg in draws:
                        if neg != center:
                            targets.append(int(neg))
                            labels.append(0.0)
                    grad_h = np.zeros(dim)
                    for t, label in zip(targets, labels):
                        s = 1.0 / (1.0 + np.exp(-np.dot(h, C[t])))
                        g = alpha * (label - s)
                        grad_h += g * C[t]
                        C[t] += g * h
                    W[center] = h = h + grad_h

    if not np.all(np.isfinite(W)):
        raise AnalysisError("non-finite embedding values after training")
    return EmbeddingModel(words=vocab, vectors=W, dim=dim, window=window,
                          negatives=negatives, epochs=epochs,
                          min_count=min_count, seed=seed)


def _unit_rows(vectors):
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vectors / norms


def cosine(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _ranked_by_cosine(model, target, exclude):
    unit = _unit_rows(model.vectors)
    tn = np.linalg.norm(target)
    sims = unit @ (target / tn if tn else target)
    ranked = [(model.words[i], float(sims[i])) for i in range(len(model.words))
              if model.words[i] not in exclude]
    ranked.sort(key=lambda ws: (-ws[1], ws[0]))
    return ranked


def most_similar(model, word, k=10):
    """Top-k vocabulary words by cosine similarity, excluding the query."""
    if k < 1:
        raise AnalysisError(f"k must be >= 1, got {k}")
    return _ranked_by_cosine(model, model.vector(word), {word})[:k]


def analogy(model, positive, negative, k=10):
    """3CosAdd: rank by cosine to sum(positive) - sum(negative)."""
    if not positive:
        raise AnalysisError("at least one positive word required")
    target = np.zeros(model.dim)
    for w in positive:
        target = target + model.vector(w)
    for w in negative:
        target = target - model.vector(w)
    return _ranked_by_cosine(model, target, set(positive) | set(negative))[:k]


def project_2d(model, word, k_similar=10, k_dissimilar=10):
    """PCA projection of the query word, its nearest and farthest neighbors."""
    ranked = _ranked_by_cosine(model, model.vector(word), {word})
    if len(ranked) < k_similar + k_dissimilar:
        raise AnalysisError(
            f"vocabulary too small for {k_similar} similar + {k_dissimilar} dissimilar words")
    similar = [w for w, _ in ranked[:k_similar]]
    dissimilar = [w for w, _ in ranked[-k_dissimilar:]] if k_dissimilar else []

    selected = [(word, "source")]
    selected += [(w, "similar") for w in similar]
    selected += [(w, "dissimilar") for w in dissimilar]

    X = np.stack([model.vector(w) for w, _ in selected])
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    coords = Xc @ vt[:2].T
    return [(w, float(x), float(y), cls)
            for (w, cls), (x, y) in zip(selected, coords)]


def save_embeddings(model, path):
    config = {"dim": model.dim, "window": model.window,
              "negatives": model.negatives, "epochs": model.epochs,
              "min_count": model.min_count, "seed": model.seed}
    vocab_blob = "\n".join(model.words).encode("utf-8")
    config_blob = json.dumps(config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, len(model.words), model.dim))
        f.write(struct.pack("<I", len(config_blob)))
        f.write(config_blob)
        f.write(struct.pack("<I", len(vocab_blob)))
        f.write(vocab_blob)
        f.write(np.ascontiguousarray(model.vectors, dtype="<f8").tobytes())


def load_embeddings(path):
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise AnalysisError(f"{path}: not an embedding file")
        version, n, dim = struct.unpack("<III", f.read(12))
        if version != FORMAT_VERSION:
            raise AnalysisError(f"{path}: unsupported version {version}")
        (clen,) = struct.unpack("<I", f.read(4))
        config = json.loads(f.read(clen).decode("utf-8"))
        (vlen,) = struct.unpack("<I", f.read(4))
        words = f.read(vlen).decode("utf-8").split("\n")
        vectors = np.frombuffer(f.read(n * dim * 8), dtype="<f8").reshape(n, dim).copy()
    if len(words) != n:
        raise AnalysisError(f"{path}: vocab length mismatch")
    return EmbeddingModel(words=words, vectors=vectors, dim=dim,
                          window=config["window"], negatives=config["negatives"],
                          epochs=config["epochs"], min_count=config["min_count"],
                          seed=config["seed"])
