"""Library-level composition of the stages: classify, assign, correlate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .classify import (
    CategoryLexicon,
    NBModel,
    SvmModel,
    TfidfModel,
    lexicon_classify_all,
    nb_classify,
    nb_train,
    svm_classify,
    svm_train,
    tfidf_fit,
    tfidf_vector,
    tokenize,
)
from .correlate import BucketSummary, CorrelationConfig, WindowedPair, sweep_buckets, window_counts
from .geo import GeoConfig, assign_stations, posts_by_station
from .model import CATEGORY_ORDER, Category, ClassifiedPost, Pollutant, Post, SensorReading, Station, normalize_text
from .synth import PipelineOutputs

METHODS = ("lexicon", "nb", "svm")


def train_model(
    corpus: Sequence[tuple[str, Optional[Category]]],
    method: str,
    alpha: float = 1.0,
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
) -> dict:
    """Train an ``nb`` or ``svm`` model from ``(text, category-or-None)`` pairs.

    Returns a JSON-ready bundle understood by :func:`classify_posts`.
    """
    docs = [tokenize(normalize_text(text)) for text, _ in corpus]
    labels = [label for _, label in corpus]
    if method == "nb":
        model = nb_train(zip(docs, labels), alpha)
        return {"kind": "nb", "hyperparameters": {"alpha": alpha}, "nb": model.to_json()}
    if method == "svm":
        tfidf = tfidf_fit(docs)
        vectors = [tfidf_vector(tfidf, d) for d in docs]
        per_cat = {}
        for cat in CATEGORY_ORDER:
            flags = [lab == cat for lab in labels]
            if any(flags) and not all(flags):
                per_cat[cat] = flags
        svm = svm_train(vectors, per_cat, lam=lam, epochs=epochs, seed=seed, dim=tfidf.dim)
        return {
            "kind": "svm",
            "hyperparameters": {"lam": lam, "epochs": epochs, "seed": seed},
            "tfidf": tfidf.to_json(),
            "svm": svm.to_json(),
        }
    raise ValueError(f"unknown trainable method {method!r}")


def classify_posts(
    posts: Iterable[Post],
    method: str = "lexicon",
    lexicon: CategoryLexicon | None = None,
    model: Mapping | None = None,
) -> list[ClassifiedPost]:
    """Classify posts and keep the pollution-related ones, in input order."""
    if method == "lexicon":
        if lexicon is None:
            raise ValueError("lexicon method needs a lexicon")
        return lexicon_classify_all(list(posts), lexicon)
    if model is None or model.get("kind") != method:
        raise ValueError(f"method {method!r} needs a trained {method} model")
    out = []
    if method == "nb":
        nb = NBModel.from_json(model["nb"])
        for p in posts:
            label, prob = nb_classify(nb, tokenize(p.text))
            if label is not None:
                out.append(ClassifiedPost(p.id, p.timestamp, frozenset({label}), "nb", {label: prob}))
        return out
    if method == "svm":
        tfidf = TfidfModel.from_json(model["tfidf"])
        svm = SvmModel.from_json(model["svm"])
        for p in posts:
            cats, margins = svm_classify(svm, tfidf_vector(tfidf, tokenize(p.text)))
            if cats:
                out.append(ClassifiedPost(p.id, p.timestamp, cats, "svm", margins))
        return out
    raise ValueError(f"unknown method {method!r}")


@dataclass
class CorrelationResult:
    pairs: dict[tuple[str, Pollutant, Category], list[WindowedPair]]
    buckets: dict[tuple[str, Pollutant, Category], list[BucketSummary]]

    def to_outputs(self) -> PipelineOutputs:
        return PipelineOutputs(
            pairs={
                key: [(p.reading.timestamp, p.reading.value, p.counts[key[2]]) for p in pairs]
                for key, pairs in self.pairs.items()
            },
            buckets=self.buckets,
        )


def classified_by_station(
    posts: Sequence[Post],
    stations: Sequence[Station],
    classified: Iterable[ClassifiedPost],
    geo: GeoConfig = GeoConfig(),
) -> dict[str, list[ClassifiedPost]]:
    """Restrict classified posts to each station's radius."""
    relevant = {c.post_id: c for c in classified}
    located = [p for p in posts if p.id in relevant]
    grouped = posts_by_station(located, assign_stations(located, stations, geo))
    return {sid: [relevant[p.id] for p in ps] for sid, ps in grouped.items()}


def correlate(
    posts: Sequence[Post],
    readings: Sequence[SensorReading],
    stations: Sequence[Station],
    classified: Iterable[ClassifiedPost],
    geo: GeoConfig = GeoConfig(),
    cfg: CorrelationConfig = CorrelationConfig(),
    k_max: int = 10,
    categories: Sequence[Category] | None = None,
    pollutants: Sequence[Pollutant] | None = None,
    station_ids: Sequence[str] | None = None,
) -> CorrelationResult:
    """Window counts and bucket sweeps for every (station, pollutant, category) triple."""
    by_station = classified_by_station(posts, stations, classified, geo)
    cats = tuple(categories) if categories else CATEGORY_ORDER
    wanted_stations = set(station_ids) if station_ids else {s.id for s in stations}
    groups: dict[tuple[str, Pollutant], list[SensorReading]] = {}
    for r in readings:
        if r.station_id in wanted_stations and (not pollutants or r.pollutant in pollutants):
            groups.setdefault((r.station_id, r.pollutant), []).append(r)
    result = CorrelationResult({}, {})
    for (sid, pollutant) in sorted(groups, key=lambda key: (key[0], key[1].value)):
        group = sorted(groups[(sid, pollutant)], key=lambda r: r.timestamp)
        all_pairs = window_counts(group, by_station.get(sid, ()), None, cfg)
        for cat in cats:
            result.pairs[(sid, pollutant, cat)] = all_pairs
            result.buckets[(sid, pollutant, cat)] = sweep_buckets(all_pairs, k_max, cat, cfg)
    return result
