"""Keyword-dictionary classification."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..model import CATEGORY_ORDER, Category, ClassifiedPost, Post, ValidationError, normalize_text


@dataclass(frozen=True)
class CategoryLexicon:
    terms: Mapping[Category, tuple[str, ...]]

    def __post_init__(self) -> None:
        for cat in CATEGORY_ORDER:
            terms = self.terms.get(cat)
            if not terms:
                raise ValidationError(f"lexicon has no terms for {cat}")
            if any(not t for t in terms):
                raise ValidationError(f"empty term under {cat}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Category, str]]) -> "CategoryLexicon":
        grouped: dict[Category, list[str]] = {c: [] for c in CATEGORY_ORDER}
        for cat, term in pairs:
            term = normalize_text(term.strip())
            if not term:
                raise ValidationError(f"empty term under {cat}")
            if term not in grouped[cat]:
                grouped[cat].append(term)
        return cls({c: tuple(ts) for c, ts in grouped.items()})

    def with_term(self, category: Category, term: str) -> "CategoryLexicon":
        pairs = [(c, t) for c in CATEGORY_ORDER for t in self.terms[c]]
        return CategoryLexicon.from_pairs(pairs + [(category, term)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["category", "term"])
        for cat in CATEGORY_ORDER:
            for term in self.terms[cat]:
                writer.writerow([cat.value, term])
        return buf.getvalue()


def load_lexicon(source: str | Path | None = None) -> CategoryLexicon:
    """Read a ``category,term`` CSV; ``None`` loads the built-in English dictionary."""
    if source is None:
        text = resources.files("humansensor.data").joinpath("lexicon.csv").read_text("utf-8")
    else:
        text = Path(source).read_text("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or {"category", "term"} - set(reader.fieldnames):
        raise ValidationError("lexicon CSV needs a category,term header")
    pairs = []
    for row in reader:
        try:
            pairs.append((Category.parse(row["category"]), row["term"] or ""))
        except ValueError as exc:
            raise ValidationError(f"lexicon line {reader.line_num}: {exc}") from exc
    return CategoryLexicon.from_pairs(pairs)


def lexicon_match(text: str, lexicon: CategoryLexicon) -> dict[Category, int]:
    """Number of distinct terms of each category occurring as substrings of ``text``.

    ``text`` is expected in canonical (NFC, case-folded) form, as produced on ingest.
    """
    hits: dict[Category, int] = {}
    for cat, terms in lexicon.terms.items():
        n = 0
        for term in terms:
            if term in text:
                n += 1
        if n:
            hits[cat] = n
    return hits


def lexicon_classify(post: Post, lexicon: CategoryLexicon) -> ClassifiedPost:
    hits = lexicon_match(post.text, lexicon)
    return ClassifiedPost(post.id, post.timestamp, frozenset(hits), "lexicon", {c: float(n) for c, n in hits.items()})


def lexicon_classify_all(posts: Sequence[Post], lexicon: CategoryLexicon) -> list[ClassifiedPost]:
    """Classify many posts, keeping only the pollution-related ones."""
    out = []
    for post in posts:
        hits = lexicon_match(post.text, lexicon)
        if hits:
            out.append(ClassifiedPost(post.id, post.timestamp, frozenset(hits), "lexicon", {c: float(n) for c, n in hits.items()}))
    return out
