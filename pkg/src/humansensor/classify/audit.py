"""Sampling plan and scoring for the human precision audit."""

from __future__ import annotations

import csv
import random
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..model import ClassifiedPost, ValidationError

AUDIT_FIELDS = ("post_id", "ts", "method", "categories", "text", "correct")
_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


def audit_sample(
    classified: Sequence[ClassifiedPost], n: int = 1000, subsets: int = 10, seed: int = 0
) -> list[list[ClassifiedPost]]:
    """Draw ``n`` pollution-related posts uniformly without replacement and split
    them into ``subsets`` equal parts, one per annotator."""
    if n <= 0 or subsets <= 0:
        raise ValueError("n and subsets must be positive")
    if n % subsets:
        raise ValueError(f"n={n} is not divisible into {subsets} equal subsets")
    pool = [c for c in classified if c.is_relevant]
    if len(pool) < n:
        raise ValueError(f"only {len(pool)} classified posts, need {n}")
    picked = random.Random(seed).sample(pool, n)
    size = n // subsets
    return [picked[i * size : (i + 1) * size] for i in range(subsets)]


def write_audit_plan(
    plan: Sequence[Sequence[ClassifiedPost]], out_dir: str | Path, texts: Mapping[str, str] | None = None
) -> list[Path]:
    from ..ingest import format_timestamp

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(2, len(str(len(plan))))
    paths = []
    for i, part in enumerate(plan, start=1):
        path = out_dir / f"audit_{i:0{width}d}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(AUDIT_FIELDS)
            for c in part:
                cats = ";".join(cat.value for cat in sorted(c.categories, key=lambda x: x.rank))
                text = (texts or {}).get(c.post_id, "")
                writer.writerow([c.post_id, format_timestamp(c.timestamp), c.method, cats, text, ""])
        paths.append(path)
    return paths


def read_verdicts(paths: Iterable[str | Path]) -> list[bool]:
    """Read ``post_id,correct`` verdict files (annotated plan files also qualify)."""
    verdicts: list[bool] = []
    for path in paths:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or "correct" not in reader.fieldnames:
                raise ValidationError(f"{path}: missing 'correct' column")
            for row in reader:
                raw = (row["correct"] or "").strip().lower()
                if raw in _TRUE:
                    verdicts.append(True)
                elif raw in _FALSE:
                    verdicts.append(False)
                else:
                    raise ValidationError(f"{path} line {reader.line_num}: bad verdict {row['correct']!r}")
    return verdicts


def precision_estimate(verdicts: Sequence[bool]) -> float:
    if not verdicts:
        raise ValueError("no verdicts")
    return sum(1 for v in verdicts if v) / len(verdicts)
