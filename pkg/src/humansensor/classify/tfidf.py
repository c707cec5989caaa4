from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: Mapping[str, int]
    idf: Sequence[float]
    n_docs: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def to_json(self) -> dict:
        terms = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        return {"n_docs": self.n_docs, "terms": terms, "idf": list(self.idf)}

    @classmethod
    def from_json(cls, data: Mapping) -> "TfidfModel":
        return cls({t: i for i, t in enumerate(data["terms"])}, tuple(data["idf"]), int(data["n_docs"]))


def tfidf_fit(corpus: Sequence[Sequence[str]]) -> TfidfModel:
    """Fit vocabulary and ``ln(N / df)`` weights; terms are indexed in sorted order."""
    if not corpus:
        raise ValueError("empty corpus")
    df: Counter = Counter()
    for doc in corpus:
        df.update(set(doc))
    terms = sorted(df)
    n = len(corpus)
    return TfidfModel({t: i for i, t in enumerate(terms)}, tuple(math.log(n / df[t]) for t in terms), n)


def tfidf_vector(model: TfidfModel, tokens: Sequence[str]) -> dict[int, float]:
    """Sparse L2-normalised vector ``{index: weight}``; unknown tokens are ignored
    and zero weights are omitted."""
    tf = Counter(t for t in tokens if t in model.vocabulary)
    weights = {}
    for term, count in tf.items():
        idx = model.vocabulary[term]
        w = count * model.idf[idx]
        if w != 0.0:
            weights[idx] = w
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0.0:
        return {}
    return {i: w / norm for i, w in sorted(weights.items())}


def to_dense(vectors: Sequence[Mapping[int, float]], dim: int) -> np.ndarray:
    out = np.zeros((len(vectors), dim))
    for row, vec in enumerate(vectors):
        for i, w in vec.items():
            out[row, i] = w
    return out
