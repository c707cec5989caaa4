"""Multinomial Naive Bayes with add-alpha smoothing.

Labels are sentinel categories plus ``None`` for off-topic training documents,
so the classifier can also say "not pollution-related".
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from ..model import CATEGORY_ORDER, Category

Label = Optional[Category]


def label_key(label: Label) -> int:
    return len(CATEGORY_ORDER) if label is None else label.rank


@dataclass(frozen=True)
class NBModel:
    labels: tuple[Label, ...]  # sorted by label_key
    log_prior: Mapping[Label, float]
    log_likelihood: Mapping[Label, Mapping[str, float]]
    log_unknown: Mapping[Label, float]  # smoothed mass of a zero-count token
    vocabulary: frozenset[str]
    alpha: float

    def to_json(self) -> dict:
        name = lambda lab: "none" if lab is None else lab.value  # noqa: E731
        return {
            "kind": "nb",
            "alpha": self.alpha,
            "labels": [name(lab) for lab in self.labels],
            "log_prior": {name(lab): v for lab, v in self.log_prior.items()},
            "log_unknown": {name(lab): v for lab, v in self.log_unknown.items()},
            "log_likelihood": {name(lab): dict(sorted(d.items())) for lab, d in self.log_likelihood.items()},
            "vocabulary": sorted(self.vocabulary),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "NBModel":
        parse = lambda s: None if s == "none" else Category.parse(s)  # noqa: E731
        return cls(
            labels=tuple(parse(s) for s in data["labels"]),
            log_prior={parse(k): float(v) for k, v in data["log_prior"].items()},
            log_likelihood={parse(k): dict(v) for k, v in data["log_likelihood"].items()},
            log_unknown={parse(k): float(v) for k, v in data["log_unknown"].items()},
            vocabulary=frozenset(data["vocabulary"]),
            alpha=float(data["alpha"]),
        )


def nb_train(corpus: Iterable[tuple[Sequence[str], Label]], alpha: float = 1.0) -> NBModel:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    doc_counts: Counter = Counter()
    token_counts: dict[Label, Counter] = {}
    for tokens, label in corpus:
        doc_counts[label] += 1
        token_counts.setdefault(label, Counter()).update(tokens)
    if not doc_counts:
        raise ValueError("empty training corpus")

    labels = tuple(sorted(doc_counts, key=label_key))
    vocab = frozenset(t for c in token_counts.values() for t in c)
    n_docs = sum(doc_counts.values())
    log_prior = {lab: math.log(doc_counts[lab] / n_docs) for lab in labels}
    log_likelihood: dict[Label, dict[str, float]] = {}
    log_unknown: dict[Label, float] = {}
    for lab in labels:
        counts = token_counts[lab]
        denom = sum(counts.values()) + alpha * len(vocab)
        log_likelihood[lab] = {t: math.log((counts[t] + alpha) / denom) for t in vocab}
        log_unknown[lab] = math.log(alpha / denom)
    return NBModel(labels, log_prior, log_likelihood, log_unknown, vocab, alpha)


def nb_posteriors(model: NBModel, tokens: Sequence[str]) -> dict[Label, float]:
    """Normalised posterior over the model's labels."""
    scores = {}
    for lab in model.labels:
        ll = model.log_likelihood[lab]
        unk = model.log_unknown[lab]
        scores[lab] = model.log_prior[lab] + sum(ll.get(t, unk) for t in tokens)
    top = max(scores.values())
    z = sum(math.exp(s - top) for s in scores.values())
    return {lab: math.exp(s - top) / z for lab, s in scores.items()}


def nb_classify(model: NBModel, tokens: Sequence[str]) -> tuple[Label, float]:
    """Most probable label and its posterior; ties go to the earlier label."""
    post = nb_posteriors(model, tokens)
    best = max(model.labels, key=lambda lab: (post[lab], -label_key(lab)))
    return best, post[best]
