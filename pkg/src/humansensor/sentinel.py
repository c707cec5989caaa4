"""Limit checks, rolling averages, post-volume alerts and the advisory feed.

The k thresholds used by default (10 weather posts, 5 pollution posts) are a
synthesis of observed post/pollutant trends, not a published alerting rule.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .correlate import CorrelationConfig, window_counts
from .model import MG_M3, PPB, UG_M3, Category, ClassifiedPost, Pollutant, SensorReading

HOUR = 3600
DAY = 24 * HOUR
MIN_COVERAGE = 0.75

DEFAULT_K: Mapping[Category, int] = {
    Category.WEATHER: 10,
    Category.POLLUTION: 5,
    Category.TRAFFIC: 5,
    Category.HEALTH: 5,
}


class Verdict(enum.Enum):
    EXCEEDED = "exceeded"
    COMPLIANT = "compliant"
    NO_LIMIT = "no-limit"
    INSUFFICIENT_DATA = "insufficient-data"

    @property
    def exceeded(self) -> bool:
        return self is Verdict.EXCEEDED


@dataclass(frozen=True)
class Limit:
    value: float
    unit: str
    period_s: int
    # the same limit in other units, e.g. {PPB: 100.0} next to 188 µg/m³
    equivalents: Mapping[str, float] = field(default_factory=dict)

    def expressed_in(self, unit: str) -> float:
        if unit == self.unit:
            return self.value
        if unit in self.equivalents:
            return self.equivalents[unit]
        if {unit, self.unit} == {MG_M3, UG_M3}:
            return self.value * 1000.0 if unit == UG_M3 else self.value / 1000.0
        raise ValueError(f"cannot express {self.value} {self.unit} limit in {unit}")

    def convert_to_limit_unit(self, value: float, unit: str) -> float:
        """Convert ``value`` in ``unit`` to this limit's own unit via the paired values."""
        return value * self.value / self.expressed_in(unit)


@dataclass(frozen=True)
class ThresholdTable:
    entries: Mapping[Pollutant, Limit]

    def get(self, pollutant: Pollutant) -> Optional[Limit]:
        return self.entries.get(pollutant)


DEFAULT_THRESHOLDS = ThresholdTable(
    {
        Pollutant.CO: Limit(40.0, MG_M3, HOUR),
        Pollutant.PM25: Limit(35.0, UG_M3, DAY),
        Pollutant.NO2: Limit(188.0, UG_M3, HOUR, {PPB: 100.0}),
    }
)


@dataclass(frozen=True, slots=True)
class AveragePoint:
    timestamp: int
    value: float
    coverage: float
    n: int


def rolling_average(readings: Sequence[SensorReading], period_s: int, sample_s: int = HOUR) -> list[AveragePoint]:
    """Trailing mean over ``(t - period, t]`` at every reading time.

    ``coverage`` is the fraction of the expected ``period / sample`` samples present.
    """
    if not readings:
        raise ValueError("empty series")
    rs = sorted(readings, key=lambda r: r.timestamp)
    expected = max(1, period_s // sample_s)
    out = []
    lo = 0
    for hi, r in enumerate(rs):
        while rs[lo].timestamp <= r.timestamp - period_s:
            lo += 1
        window = rs[lo : hi + 1]
        mean = sum(x.value for x in window) / len(window)
        out.append(AveragePoint(r.timestamp, mean, min(1.0, len(window) / expected), len(window)))
    return out


def epa_check(
    value: float,
    pollutant: Pollutant,
    unit: str | None = None,
    table: ThresholdTable = DEFAULT_THRESHOLDS,
    coverage: float | None = None,
    min_coverage: float = MIN_COVERAGE,
) -> Verdict:
    """Compare a (possibly averaged) value against its limit; at the limit is compliant.

    ``coverage`` applies to averaged values only: below ``min_coverage`` no
    verdict is asserted.
    """
    limit = table.get(pollutant)
    if limit is None:
        return Verdict.NO_LIMIT
    if coverage is not None and coverage < min_coverage:
        return Verdict.INSUFFICIENT_DATA
    v = value if unit is None else limit.convert_to_limit_unit(value, unit)
    return Verdict.EXCEEDED if v > limit.value else Verdict.COMPLIANT


@dataclass(frozen=True)
class Assessment:
    reading: SensorReading
    value: float  # raw value, or trailing average for multi-hour limits
    unit: str
    limit: Optional[float]
    verdict: Verdict


def assess_readings(
    readings: Sequence[SensorReading], table: ThresholdTable = DEFAULT_THRESHOLDS
) -> list[Assessment]:
    """Check every reading against its limit, averaging over the limit's period where it exceeds one hour."""
    groups: dict[tuple[str, Pollutant], list[SensorReading]] = {}
    for r in readings:
        groups.setdefault((r.station_id, r.pollutant), []).append(r)
    out = []
    for (_, pollutant), group in groups.items():
        limit = table.get(pollutant)
        if limit is None:
            out.extend(Assessment(r, r.value, r.unit, None, Verdict.NO_LIMIT) for r in group)
            continue
        if limit.period_s > HOUR:
            group = sorted(group, key=lambda r: r.timestamp)
            for r, avg in zip(group, rolling_average(group, limit.period_s)):
                verdict = epa_check(avg.value, pollutant, r.unit, table, coverage=avg.coverage)
                out.append(Assessment(r, avg.value, r.unit, limit.expressed_in(r.unit), verdict))
        else:
            for r in group:
                out.append(Assessment(r, r.value, r.unit, limit.expressed_in(r.unit), epa_check(r.value, pollutant, r.unit, table)))
    out.sort(key=lambda a: (a.reading.timestamp, a.reading.station_id, a.reading.pollutant.value))
    return out


@dataclass(frozen=True)
class Alert:
    station_id: str
    category: Category
    start: int
    end: int
    count: int
    k: int
    pollutant: Pollutant
    value: float
    unit: str
    limit: Optional[float]
    verdict: Verdict

    @property
    def corroborated(self) -> bool:
        return self.verdict.exceeded


def detect_alerts(
    posts_by_station: Mapping[str, Sequence[ClassifiedPost]],
    readings: Sequence[SensorReading],
    k: int,
    category: Category,
    cfg: CorrelationConfig = CorrelationConfig(),
    table: ThresholdTable = DEFAULT_THRESHOLDS,
) -> list[Alert]:
    """One alert per reading whose forward window holds at least ``k`` posts of ``category``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    assessments = assess_readings(readings, table)
    by_station: dict[str, list[Assessment]] = {}
    for a in assessments:
        by_station.setdefault(a.reading.station_id, []).append(a)
    alerts = []
    for station, group in by_station.items():
        pairs = window_counts([a.reading for a in group], posts_by_station.get(station, ()), category, cfg)
        for a, pair in zip(group, pairs):
            n = pair.counts[category]
            if n >= k:
                t = a.reading.timestamp
                alerts.append(
                    Alert(station, category, t, t + cfg.window_s, n, k, a.reading.pollutant, a.value, a.unit, a.limit, a.verdict)
                )
    alerts.sort(key=lambda al: (al.start, al.station_id, al.pollutant.value))
    return alerts


def exceedances(assessments: Iterable[Assessment]) -> list[Assessment]:
    return [a for a in assessments if a.verdict.exceeded]


SEVERITY_ORDER = ("alarm", "watch", "info")
ADVISORY_FIELDS = ("ts", "station", "severity", "category", "count", "k", "pollutant", "value", "limit", "note")


@dataclass(frozen=True)
class AdvisoryRecord:
    timestamp: int
    station: str
    severity: str
    category: Optional[Category]
    count: int
    k: Optional[int]
    pollutant: Pollutant
    value: float
    limit: Optional[float]
    note: str

    def to_record(self) -> dict:
        from .ingest import format_timestamp

        rec = {
            "ts": format_timestamp(self.timestamp),
            "station": self.station,
            "severity": self.severity,
            "category": None if self.category is None else self.category.value,
            "count": self.count,
            "k": self.k,
            "pollutant": self.pollutant.value,
            "value": self.value,
            "limit": self.limit,
            "note": self.note,
        }
        assert tuple(rec) == ADVISORY_FIELDS
        return rec


def emit_advisories(
    alerts: Iterable[Alert],
    exceeded: Iterable[Assessment],
    counts: Mapping[tuple[str, int], int] | None = None,
) -> list[AdvisoryRecord]:
    """Merge post-volume alerts and sensor exceedances into one ordered feed.

    An alert backed by an exceedance becomes ``alarm``, an unbacked alert
    ``watch``. Exceedances not covered by any alert become sensor-only
    ``info`` records; ``counts`` optionally supplies their post count keyed by
    ``(station, timestamp)``.
    """
    records = []
    covered = set()
    for a in alerts:
        covered.add((a.station_id, a.start, a.pollutant))
        if a.corroborated:
            note = f"{a.count} {a.category.value.lower()} posts within {(a.end - a.start) // 60} min; {a.pollutant.value} above limit"
            severity = "alarm"
        else:
            note = f"{a.count} {a.category.value.lower()} posts within {(a.end - a.start) // 60} min; sensor {a.verdict.value}"
            severity = "watch"
        records.append(
            AdvisoryRecord(a.start, a.station_id, severity, a.category, a.count, a.k, a.pollutant, a.value, a.limit, note)
        )
    for e in exceeded:
        r = e.reading
        if not e.verdict.exceeded or (r.station_id, r.timestamp, r.pollutant) in covered:
            continue
        n = (counts or {}).get((r.station_id, r.timestamp), 0)
        records.append(
            AdvisoryRecord(r.timestamp, r.station_id, "info", None, n, None, r.pollutant, e.value, e.limit, "sensor-only exceedance")
        )
    records.sort(
        key=lambda rec: (
            rec.timestamp,
            rec.station,
            SEVERITY_ORDER.index(rec.severity),
            rec.pollutant.value,
            -1 if rec.category is None else rec.category.rank,
        )
    )
    return records


def advisories_jsonl(records: Iterable[AdvisoryRecord]) -> str:
    return "".join(json.dumps(rec.to_record(), ensure_ascii=False) + "\n" for rec in records)
