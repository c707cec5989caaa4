"""Seeded synthetic posts and readings with a known post/pollutant coupling.

Per station and hour the on-topic post rate is

    base_rate + gain * max(0, driver_value - knee)

split across categories by ``category_weights``; counts are Poisson. Every
latent quantity is written to a JSON manifest that :func:`oracle_check` uses
to recount windows and buckets by brute force.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .correlate import AT_LEAST_K, BucketSummary, CorrelationConfig
from .geo import EARTH_RADIUS_M
from .ingest import format_timestamp, load_station_registry, serialize_posts, serialize_readings, serialize_stations
from .model import CATEGORY_ORDER, UG_M3, MG_M3, Category, Pollutant, Post, SensorReading, Station
from .classify.lexicon import CategoryLexicon, load_lexicon

# Filler vocabulary for templated texts; none of these contain a lexicon term.
_FILLER = (
    "today", "again", "this morning", "downtown", "near the station", "after lunch",
    "on my way home", "so tired", "weekend plans", "at the office", "tonight", "right now",
)
_NOISE = (
    "great noodles for lunch", "new phone arrived", "watching a movie with friends",
    "happy birthday to my sister", "the concert was amazing", "studying for exams",
    "cat is sleeping on the sofa", "shopping at the mall", "coffee break", "long meeting at work",
    "basketball game tonight", "cooking dinner at home", "reading a good book", "good morning everyone",
)


@dataclass(frozen=True)
class PollutantProcess:
    pollutant: Pollutant
    unit: str
    baseline: float
    diurnal_amplitude: float = 0.0
    spike_rate: float = 0.0  # spike onsets per hour
    spike_magnitude: float = 0.0  # mean of the exponential spike height
    spike_decay_h: float = 6.0
    noise_sd: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    hours: int = 24 * 90
    start: int = 1357603200  # 2013-01-08T00:00Z
    station_ids: tuple[str, ...] = ("gz-embassy",)
    processes: tuple[PollutantProcess, ...] = (
        PollutantProcess(Pollutant.PM25, UG_M3, 60.0, 15.0, 0.02, 90.0, 8.0, 6.0),
        PollutantProcess(Pollutant.CO, MG_M3, 0.8, 0.2, 0.01, 0.5, 6.0, 0.05),
    )
    driver: Pollutant = Pollutant.PM25
    base_rate: float = 0.5  # on-topic posts per hour at or below the knee
    gain: float = 0.05  # extra posts per hour per unit of driver above the knee
    knee: float = 40.0
    category_weights: Mapping[Category, float] = field(
        default_factory=lambda: {Category.WEATHER: 0.55, Category.POLLUTION: 0.25, Category.TRAFFIC: 0.15, Category.HEALTH: 0.05}
    )
    noise_rate: float = 2.0  # off-topic posts per hour
    station_scale: Mapping[str, float] = field(default_factory=dict)  # multiplies both rates
    place_radius_m: float = 4900.0
    users: int = 5000
    window_s: int = 7200

    def __post_init__(self) -> None:
        if self.base_rate < 0 or self.gain < 0 or self.noise_rate < 0:
            raise ValueError("rates and gain must be non-negative")
        if self.hours <= 0:
            raise ValueError("hours must be positive")
        total = sum(self.category_weights.values())
        if abs(total - 1.0) > 1e-9 or any(w < 0 for w in self.category_weights.values()):
            raise ValueError("category weights must be non-negative and sum to 1")
        if self.driver not in {p.pollutant for p in self.processes}:
            raise ValueError(f"driver {self.driver} has no pollutant process")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["processes"] = [{**asdict(p), "pollutant": p.pollutant.value} for p in self.processes]
        d["driver"] = self.driver.value
        d["category_weights"] = {c.value: w for c, w in self.category_weights.items()}
        d["station_ids"] = list(self.station_ids)
        d["station_scale"] = dict(self.station_scale)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthConfig":
        d = dict(data)
        if "processes" in d:
            d["processes"] = tuple(
                PollutantProcess(**{**p, "pollutant": Pollutant.parse(p["pollutant"])}) for p in d["processes"]
            )
        if "driver" in d:
            d["driver"] = Pollutant.parse(d["driver"])
        if "category_weights" in d:
            d["category_weights"] = {Category.parse(k): float(v) for k, v in d["category_weights"].items()}
        if "station_ids" in d:
            d["station_ids"] = tuple(d["station_ids"])
        return cls(**d)


def full_scale_config(seed: int = 0, gain: float = 0.05) -> SynthConfig:
    """Four stations, 18 months, about 640k posts around the three Hong Kong
    sites and 910k around Guangzhou."""
    return SynthConfig(
        seed=seed,
        hours=24 * 548,
        station_ids=("central", "causeway-bay", "mongkok", "gz-embassy"),
        gain=gain,
        noise_rate=11.5,
        station_scale={"central": 1.18, "causeway-bay": 1.18, "mongkok": 1.18, "gz-embassy": 5.0},
    )


@dataclass
class SynthDataset:
    posts: list[Post]
    readings: list[SensorReading]
    stations: list[Station]
    manifest: dict


def _series(proc: PollutantProcess, hours: int, start: int, rng: np.random.Generator) -> tuple[np.ndarray, list[int]]:
    h = np.arange(hours)
    hour_of_day = ((start // 3600) + h) % 24
    # peak mid-afternoon
    diurnal = proc.diurnal_amplitude * np.sin(2 * np.pi * (hour_of_day - 9) / 24)
    onsets = rng.poisson(proc.spike_rate, hours)
    heights = np.array([rng.exponential(proc.spike_magnitude) * n if n else 0.0 for n in onsets])
    decay = math.exp(-1.0 / proc.spike_decay_h) if proc.spike_decay_h > 0 else 0.0
    spikes = np.empty(hours)
    level = 0.0
    for i in range(hours):
        level = level * decay + heights[i]
        spikes[i] = level
    noise = rng.normal(0.0, proc.noise_sd, hours) if proc.noise_sd > 0 else np.zeros(hours)
    values = np.maximum(0.0, proc.baseline + diurnal + spikes + noise)
    # fixed precision so the CSV round-trip is exact
    values = np.round(values, 4 if proc.unit == MG_M3 else 2)
    return values, np.flatnonzero(onsets).tolist()


def _destination(lat: float, lon: float, dist: np.ndarray, bearing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phi1, lam1 = math.radians(lat), math.radians(lon)
    delta = dist / EARTH_RADIUS_M
    phi2 = np.arcsin(math.sin(phi1) * np.cos(delta) + math.cos(phi1) * np.sin(delta) * np.cos(bearing))
    lam2 = lam1 + np.arctan2(np.sin(bearing) * np.sin(delta) * math.cos(phi1), np.cos(delta) - math.sin(phi1) * np.sin(phi2))
    return np.round(np.degrees(phi2), 6), np.round(np.degrees(lam2), 6)


def _term_truth(lexicon: CategoryLexicon) -> dict[str, frozenset[Category]]:
    truth: dict[str, set[Category]] = {}
    for cat in CATEGORY_ORDER:
        for term in lexicon.terms[cat]:
            truth.setdefault(term, set()).add(cat)
    return {t: frozenset(c) for t, c in truth.items()}


def category_rate_matrix(cfg: SynthConfig, lexicon: CategoryLexicon) -> dict[Category, float]:
    """Expected fraction of on-topic posts carrying each category (a post is
    drawn for one category but a shared term makes it count in several)."""
    truth = _term_truth(lexicon)
    out = {c: 0.0 for c in CATEGORY_ORDER}
    for drawn, w in cfg.category_weights.items():
        terms = lexicon.terms[drawn]
        for term in terms:
            for c in truth[term]:
                out[c] += w / len(terms)
    return out


def _median_band(values: np.ndarray, n: float, design_effect: float = 2.0) -> float:
    """Half-width of a 95% band for the median of a random ``n``-subset of ``values``.

    Overlapping 2 h windows share posts between consecutive readings, so the
    effective subset size is divided by ``design_effect``.
    """
    N = len(values)
    if n < 1 or N == 0:
        return float("inf")
    n_eff = max(1.0, n / design_effect)
    sd = math.sqrt(0.25 / n_eff * max(0.0, 1.0 - n / N))
    lo = np.quantile(values, max(0.0, 0.5 - 1.96 * sd))
    hi = np.quantile(values, min(1.0, 0.5 + 1.96 * sd))
    med = np.quantile(values, 0.5)
    return float(max(med - lo, hi - med))


def synth_generate(cfg: SynthConfig, lexicon: CategoryLexicon | None = None, k_max: int = 10) -> SynthDataset:
    lexicon = lexicon or load_lexicon()
    registry = {s.id: s for s in load_station_registry()}
    stations = [registry[sid] for sid in cfg.station_ids]
    rng = np.random.default_rng(cfg.seed)
    truth_by_term = _term_truth(lexicon)
    cat_share = category_rate_matrix(cfg, lexicon)
    cats = [c for c in CATEGORY_ORDER if cfg.category_weights.get(c, 0) > 0]
    weights = np.array([cfg.category_weights[c] for c in cats])

    readings: list[SensorReading] = []
    posts: list[Post] = []
    truth_rows: list[list] = []
    station_manifest = {}
    for station in stations:
        scale = cfg.station_scale.get(station.id, 1.0)
        series = {}
        spikes = {}
        for proc in cfg.processes:
            values, onset_hours = _series(proc, cfg.hours, cfg.start, rng)
            series[proc.pollutant] = values
            spikes[proc.pollutant.value] = [cfg.start + 3600 * h for h in onset_hours]
            readings.extend(
                SensorReading(station.id, cfg.start + 3600 * i, proc.pollutant, float(v), proc.unit)
                for i, v in enumerate(values.tolist())
            )
        rate = scale * (cfg.base_rate + cfg.gain * np.maximum(0.0, series[cfg.driver] - cfg.knee))
        on_counts = rng.poisson(rate)
        off_counts = rng.poisson(scale * cfg.noise_rate, cfg.hours)

        hours_on = np.repeat(np.arange(cfg.hours), on_counts)
        hours_off = np.repeat(np.arange(cfg.hours), off_counts)
        n_on, n_off = len(hours_on), len(hours_off)
        hours = np.concatenate([hours_on, hours_off])
        n = len(hours)
        offsets = rng.integers(0, 3600, n)
        ts = cfg.start + 3600 * hours + offsets
        dist = cfg.place_radius_m * np.sqrt(rng.random(n))
        bearing = rng.random(n) * 2 * np.pi
        lats, lons = _destination(station.lat, station.lon, dist, bearing)
        drawn = rng.choice(len(cats), size=n_on, p=weights)
        term_pick = rng.random(n_on)
        filler_a = rng.integers(0, len(_FILLER), n)
        filler_b = rng.integers(0, len(_FILLER), n)
        noise_pick = rng.integers(0, len(_NOISE), n_off)
        users = rng.integers(0, cfg.users, n)

        order = np.argsort(ts, kind="stable")
        for j in order.tolist():
            if j < n_on:
                terms = lexicon.terms[cats[drawn[j]]]
                term = terms[int(term_pick[j] * len(terms))]
                text = f"{_FILLER[filler_a[j]]} {term} {_FILLER[filler_b[j]]}"
                truth = truth_by_term[term]
            else:
                text = f"{_NOISE[noise_pick[j - n_on]]} {_FILLER[filler_a[j]]}"
                truth = frozenset()
            pid = f"{station.id}-{len(posts):08d}"
            posts.append(Post(pid, f"u{int(users[j]):06d}", int(ts[j]), float(lats[j]), float(lons[j]), text))
            truth_rows.append([pid, station.id, int(ts[j]), float(lats[j]), float(lons[j]), sorted(c.value for c in truth)])

        station_manifest[station.id] = {
            "latent_rate": [round(float(r), 9) for r in rate],
            "on_topic_counts": on_counts.tolist(),
            "off_topic_counts": off_counts.tolist(),
            "spike_onsets": spikes,
            "values": {p.value: v.tolist() for p, v in series.items()},
        }

    manifest = {
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "start": format_timestamp(cfg.start),
        "category_share": {c.value: v for c, v in cat_share.items()},
        "stations": station_manifest,
        "posts": truth_rows,
        "analytic": _analytic(cfg, station_manifest, cat_share, k_max),
    }
    readings.sort(key=lambda r: (r.timestamp, r.station_id, r.pollutant.value))
    posts.sort(key=lambda p: (p.timestamp, p.id))
    return SynthDataset(posts, readings, stations, manifest)


def _analytic(cfg: SynthConfig, station_manifest: Mapping, cat_share: Mapping[Category, float], k_max: int) -> dict:
    """Closed-form expectations recorded alongside the data."""
    out: dict[str, Any] = {
        "correlation_band_95": 1.96 / math.sqrt(max(1, cfg.hours - 3)),
        "window_hours": cfg.window_s / 3600,
        "median_band_95": {},
        "expected_bucket_n": {},
    }
    for sid, sm in station_manifest.items():
        rate = np.asarray(sm["latent_rate"])
        nxt = np.append(rate[1:], 0.0)
        for cat in CATEGORY_ORDER:
            # window (t, t+2h] covers the reading's own hour and the next one
            mu = cat_share[cat] * (rate + nxt)
            expected_n = {str(k): float(np.sum(stats.poisson.sf(k - 1, mu))) for k in range(1, k_max + 1)}
            key = f"{sid}|{cat.value}"
            out["expected_bucket_n"][key] = expected_n
            for pollutant, values in sm["values"].items():
                vals = np.asarray(values)
                out["median_band_95"][f"{sid}|{pollutant}|{cat.value}"] = {
                    str(k): _median_band(vals, expected_n[str(k)]) for k in range(1, k_max + 1)
                }
    return out


def write_dataset(ds: SynthDataset, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "posts": out / "posts.jsonl",
        "readings": out / "readings.csv",
        "stations": out / "stations.csv",
        "manifest": out / "truth.json",
    }
    paths["posts"].write_bytes(serialize_posts(ds.posts))
    paths["readings"].write_bytes(serialize_readings(ds.readings))
    paths["stations"].write_bytes(serialize_stations(ds.stations))
    paths["manifest"].write_text(json.dumps(ds.manifest, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    return paths


# -- brute-force oracle ------------------------------------------------------


@dataclass(frozen=True)
class PipelineOutputs:
    """Window counts and bucket summaries produced by the pipeline under test.

    ``pairs`` maps ``(station, pollutant, category)`` to ``[(reading_ts, value,
    count), ...]``; ``buckets`` maps the same key to summaries for k = 1..k_max.
    """

    pairs: Mapping[tuple[str, Pollutant, Category], Sequence[tuple[int, float, int]]]
    buckets: Mapping[tuple[str, Pollutant, Category], Sequence[BucketSummary]]


@dataclass(frozen=True)
class Diff:
    station: str
    pollutant: str
    category: str
    reading_ts: int | None
    k: int | None
    field: str
    expected: Any
    actual: Any


@dataclass
class OracleReport:
    diffs: list[Diff]
    checked_counts: int = 0
    checked_buckets: int = 0

    @property
    def ok(self) -> bool:
        return not self.diffs


def _oracle_haversine(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    a = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, a)))


def _oracle_box(values: list[float], k: int, fence: float) -> BucketSummary:
    xs = sorted(values)
    n = len(xs)
    if n == 0:
        return BucketSummary(k=k, n=0)

    def q(p: float) -> float:
        pos = (n - 1) * p
        i = int(pos)
        f = pos - i
        if f == 0 or i == n - 1:
            return xs[i]
        return xs[i] + (xs[i + 1] - xs[i]) * f

    q1, q2, q3 = q(0.25), q(0.5), q(0.75)
    lo, hi = q1 - fence * (q3 - q1), q3 + fence * (q3 - q1)
    kept = [x for x in xs if lo <= x <= hi]
    return BucketSummary(
        k, n, min(kept[0], q1), q1, q2, q3, max(kept[-1], q3), tuple(x for x in xs if x < lo or x > hi), xs[0], xs[-1]
    )


_BUCKET_FIELDS = ("n", "whisker_low", "q1", "median", "q3", "whisker_high", "outliers", "raw_min", "raw_max")


def oracle_check(
    outputs: PipelineOutputs,
    manifest: Mapping,
    stations: Sequence[Station],
    radius_m: float = 5000.0,
    cfg: CorrelationConfig = CorrelationConfig(),
) -> OracleReport:
    """Recount every window and rebuild every bucket from the manifest, then diff.

    The recount checks each (post, station) distance and each (reading, post)
    pair directly, without sorting or sweeping.
    """
    truth = manifest["posts"]
    post_ts = np.array([row[2] for row in truth], dtype=np.int64)
    post_cats = [set(row[5]) for row in truth]
    report = OracleReport([])
    for station in stations:
        near = np.array(
            [_oracle_haversine(row[3], row[4], station.lat, station.lon) <= radius_m for row in truth], dtype=bool
        )
        values_by_pollutant = _station_values(manifest, station.id)
        for (sid, pollutant, category), got_pairs in sorted(
            ((k, v) for k, v in outputs.pairs.items() if k[0] == station.id), key=lambda kv: (kv[0][1].value, kv[0][2].rank)
        ):
            mask = near & np.array([category.value in c for c in post_cats], dtype=bool)
            ts_sel = post_ts[mask]
            expected_rows = values_by_pollutant.get(pollutant.value, [])
            exp_counts = {}
            if expected_rows:
                r_ts = np.array([t for t, _ in expected_rows], dtype=np.int64)
                inside = (ts_sel[None, :] > r_ts[:, None]) & (ts_sel[None, :] <= r_ts[:, None] + cfg.window_s)
                exp_counts = dict(zip(r_ts.tolist(), inside.sum(axis=1).tolist()))
            exp_values = dict(expected_rows)
            got = {t: (v, c) for t, v, c in got_pairs}
            for t in sorted(set(exp_counts) | set(got)):
                report.checked_counts += 1
                if t not in got or t not in exp_counts:
                    report.diffs.append(
                        Diff(sid, pollutant.value, category.value, t, None, "reading", t in exp_counts, t in got)
                    )
                    continue
                if got[t][1] != exp_counts[t]:
                    report.diffs.append(Diff(sid, pollutant.value, category.value, t, None, "count", exp_counts[t], got[t][1]))
                if got[t][0] != exp_values[t]:
                    report.diffs.append(Diff(sid, pollutant.value, category.value, t, None, "value", exp_values[t], got[t][0]))
            for summary in outputs.buckets.get((sid, pollutant, category), ()):
                report.checked_buckets += 1
                k = summary.k
                if cfg.bucket_mode == AT_LEAST_K:
                    vals = [exp_values[t] for t, c in exp_counts.items() if c >= k]
                else:
                    vals = [exp_values[t] for t, c in exp_counts.items() if c == k]
                expected = _oracle_box(vals, k, cfg.fence)
                for name in _BUCKET_FIELDS:
                    e, a = getattr(expected, name), getattr(summary, name)
                    if e != a:
                        report.diffs.append(Diff(sid, pollutant.value, category.value, None, k, name, e, a))
                        break
    return report


def _station_values(manifest: Mapping, station_id: str) -> dict[str, list[tuple[int, float]]]:
    sm = manifest["stations"].get(station_id)
    if sm is None:
        return {}
    start = manifest["config"]["start"]
    return {p: [(start + 3600 * i, v) for i, v in enumerate(vals)] for p, vals in sm["values"].items()}


def hourly_correlation(manifest: Mapping, station_id: str, pollutant: Pollutant) -> float:
    """Pearson correlation between realised on-topic hourly counts and the pollutant series."""
    sm = manifest["stations"][station_id]
    counts = np.asarray(sm["on_topic_counts"], dtype=float)
    values = np.asarray(sm["values"][pollutant.value], dtype=float)
    if counts.std() == 0 or values.std() == 0:
        return 0.0
    return float(np.corrcoef(counts, values)[0, 1])


def with_seed(cfg: SynthConfig, seed: int) -> SynthConfig:
    return replace(cfg, seed=seed)
