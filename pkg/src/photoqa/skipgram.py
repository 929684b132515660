"""Skip-gram word embeddings with negative sampling, trained from scratch.

Sentences are lists of normalized terms. Negative samples are drawn from the
unigram distribution raised to 3/4. Deterministic given the seed.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import numpy as np


class WordVecs:
    def __init__(self, terms: list[str], matrix: np.ndarray) -> None:
        self.terms = terms
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self._index = {t: i for i, t in enumerate(terms)}
        norms = np.linalg.norm(self.matrix, axis=1)
        norms[norms == 0] = 1.0
        self._unit = self.matrix / norms[:, None]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def vector(self, term: str) -> np.ndarray | None:
        idx = self._index.get(term)
        return None if idx is None else self.matrix[idx]

    def cosine(self, a: str, b: str) -> float:
        ia, ib = self._index.get(a), self._index.get(b)
        if ia is None or ib is None:
            return 0.0
        return float(np.dot(self._unit[ia], self._unit[ib]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for term, row in zip(self.terms, self.matrix):
                fh.write(term + " " + " ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "WordVecs":
        terms = []
        rows = []
        for line in Path(path).read_text("utf-8").splitlines():
            if not line.strip():
                continue
            parts = line.split(" ")
            terms.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
        return cls(terms, np.array(rows))


def train_skipgram(
    sentences: list[list[str]],
    dim: int = 32,
    window: int = 4,
    negatives: int = 5,
    epochs: int = 3,
    seed: int = 0,
    lr: float = 0.05,
) -> WordVecs:
    if window < 1 or negatives < 1:
        raise ValueError("window and negatives must be >= 1")
    counts = Counter(t for sent in sentences for t in sent)
    if not counts:
        raise ValueError("empty token stream")

    terms = list(counts)  # first-appearance order, deterministic
    index = {t: i for i, t in enumerate(terms)}
    n = len(terms)

    freq = np.array([counts[t] for t in terms], dtype=np.float64)
    noise = freq**0.75
    noise /= noise.sum()

    rng = np.random.default_rng(seed)
    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))

    pairs: list[tuple[int, int]] = []
    for sent in sentences:
        ids = [index[t] for t in sent]
        for pos, center in enumerate(ids):
            lo = max(0, pos - window)
            hi = min(len(ids), pos + window + 1)
            for ctx_pos in range(lo, hi):
                if ctx_pos != pos:
                    pairs.append((center, ids[ctx_pos]))
    if not pairs:
        raise ValueError("no training pairs; sentences too short for the window")

    for _ in range(epochs):
        neg_draws = rng.choice(n, size=(len(pairs), negatives), p=noise)
        for pair_idx, (center, ctx) in enumerate(pairs):
            h = w_in[center]
            dh = np.zeros(dim)
            for label, target in [(1.0, ctx)] + [
                (0.0, int(t)) for t in neg_draws[pair_idx]
            ]:
                z = 1.0 / (1.0 + np.exp(-np.dot(h, w_out[target])))
                g = (z - label) * lr
                dh += g * w_out[target]
                w_out[target] -= g * h
            w_in[center] -= dh

    return WordVecs(terms, w_in)
