"""Forward-window post counts per reading and per-minimum-count box statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .model import CATEGORY_ORDER, Category, ClassifiedPost, SensorReading

AT_LEAST_K = "at_least_k"
EXACTLY_K = "exactly_k"
BUCKET_FIELDS = ("station", "pollutant", "category", "k", "n", "min", "q1", "median", "q3", "max", "outliers")


@dataclass(frozen=True)
class CorrelationConfig:
    window_s: int = 7200
    bucket_mode: str = AT_LEAST_K
    quartile_rule: str = "linear"  # interpolation at (n - 1) * q over sorted values
    fence: float = 1.5

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValueError("window length must be positive")
        if self.bucket_mode not in (AT_LEAST_K, EXACTLY_K):
            raise ValueError(f"unknown bucket mode {self.bucket_mode!r}")
        if self.quartile_rule != "linear":
            raise ValueError(f"unsupported quartile rule {self.quartile_rule!r}")


@dataclass(frozen=True, slots=True)
class WindowedPair:
    """A reading with the number of posts per category in ``(t, t + T]``."""

    reading: SensorReading
    counts: Mapping[Category, int]

    def count(self, category: Category) -> int:
        return self.counts[category]

    @property
    def value(self) -> float:
        return self.reading.value


@dataclass(frozen=True)
class BucketSummary:
    k: int
    n: int
    whisker_low: Optional[float] = None
    q1: Optional[float] = None
    median: Optional[float] = None
    q3: Optional[float] = None
    whisker_high: Optional[float] = None
    outliers: tuple[float, ...] = ()
    raw_min: Optional[float] = None
    raw_max: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.n == 0


def _forward_counts(reading_ts: Sequence[int], post_ts: Sequence[int], window: int) -> list[int]:
    """Two-pointer sweep; ``post_ts`` must be sorted. Returns counts in reading order."""
    order = sorted(range(len(reading_ts)), key=reading_ts.__getitem__)
    counts = [0] * len(reading_ts)
    m = len(post_ts)
    lo = hi = 0
    for idx in order:
        t = reading_ts[idx]
        while lo < m and post_ts[lo] <= t:
            lo += 1
        end = t + window
        if hi < lo:
            hi = lo
        while hi < m and post_ts[hi] <= end:
            hi += 1
        counts[idx] = hi - lo
    return counts


def window_counts(
    readings: Sequence[SensorReading],
    posts: Iterable[ClassifiedPost],
    category: Category | None = None,
    cfg: CorrelationConfig = CorrelationConfig(),
) -> list[WindowedPair]:
    """Count, for every reading, the posts of each category published in ``(t, t + T]``.

    ``posts`` are the classified posts assigned to the readings' station. With
    ``category=None`` all four categories are counted; a post carrying several
    categories counts once in each.
    """
    cats = CATEGORY_ORDER if category is None else (category,)
    times: dict[Category, list[int]] = {c: [] for c in cats}
    for p in posts:
        for c in p.categories:
            if c in times:
                times[c].append(p.timestamp)
    reading_ts = [r.timestamp for r in readings]
    per_cat = {c: _forward_counts(reading_ts, sorted(ts), cfg.window_s) for c, ts in times.items()}
    return [WindowedPair(r, {c: per_cat[c][i] for c in cats}) for i, r in enumerate(readings)]


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation at position ``(n - 1) * q``."""
    pos = (len(sorted_values) - 1) * q
    i = math.floor(pos)
    frac = pos - i
    if frac == 0 or i + 1 >= len(sorted_values):
        return sorted_values[i]
    lo, hi = sorted_values[i], sorted_values[i + 1]
    return lo + (hi - lo) * frac


def five_number_summary(values: Iterable[float], k: int = 0, fence: float = 1.5) -> BucketSummary:
    """Box statistics with Tukey fences at ``fence * IQR``.

    Whiskers reach the most extreme values inside the fences but never retreat
    inside the box: if no value lies between a fence and its quartile the
    whisker sits on the quartile.
    """
    xs = sorted(values)
    if not xs:
        return BucketSummary(k=k, n=0)
    q1, med, q3 = quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75)
    iqr = q3 - q1
    low_fence, high_fence = q1 - fence * iqr, q3 + fence * iqr
    inside = [v for v in xs if low_fence <= v <= high_fence]
    outliers = tuple(v for v in xs if v < low_fence or v > high_fence)
    return BucketSummary(
        k=k,
        n=len(xs),
        whisker_low=min(inside[0], q1),
        q1=q1,
        median=med,
        q3=q3,
        whisker_high=max(inside[-1], q3),
        outliers=outliers,
        raw_min=xs[0],
        raw_max=xs[-1],
    )


def select_bucket(pairs: Iterable[WindowedPair], k: int, category: Category, mode: str = AT_LEAST_K) -> list[float]:
    if mode == AT_LEAST_K:
        return [p.value for p in pairs if p.counts[category] >= k]
    return [p.value for p in pairs if p.counts[category] == k]


def bucket_stats(
    pairs: Sequence[WindowedPair], k: int, category: Category, cfg: CorrelationConfig = CorrelationConfig()
) -> BucketSummary:
    return five_number_summary(select_bucket(pairs, k, category, cfg.bucket_mode), k=k, fence=cfg.fence)


def sweep_buckets(
    pairs: Sequence[WindowedPair], k_max: int, category: Category, cfg: CorrelationConfig = CorrelationConfig()
) -> list[BucketSummary]:
    """One summary per minimum post count ``k = 1 .. k_max``."""
    return [bucket_stats(pairs, k, category, cfg) for k in range(1, k_max + 1)]


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def bucket_rows(
    station: str, pollutant: str, category: Category, summaries: Iterable[BucketSummary]
) -> list[list[str]]:
    rows = []
    for s in summaries:
        rows.append(
            [
                station,
                str(pollutant),
                category.value,
                str(s.k),
                str(s.n),
                _fmt(s.whisker_low),
                _fmt(s.q1),
                _fmt(s.median),
                _fmt(s.q3),
                _fmt(s.whisker_high),
                ";".join(_fmt(v) for v in s.outliers),
            ]
        )
    return rows


def bucket_table_csv(rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BUCKET_FIELDS)
    writer.writerows(rows)
    return buf.getvalue()


def read_bucket_table(text: str) -> list[dict]:
    """Parse a bucket table back into typed rows (empty cells become ``None``)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        num = lambda s: None if s == "" else float(s)  # noqa: E731
        out.append(
            {
                "station": row["station"],
                "pollutant": row["pollutant"],
                "category": row["category"],
                "k": int(row["k"]),
                "n": int(row["n"]),
                **{f: num(row[f]) for f in ("min", "q1", "median", "q3", "max")},
                "outliers": [float(v) for v in row["outliers"].split(";") if v],
            }
        )
    return out
