"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import contextlib
import math
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, T0, make_reading, tagged
from humansensor.classify import (
    audit_sample,
    lexicon_classify,
    lexicon_classify_all,
    load_lexicon,
    nb_posteriors,
    nb_train,
    precision_estimate,
    svm_classify,
    svm_train,
)
from humansensor.correlate import WindowedPair, bucket_stats, window_counts
from humansensor.geo import EARTH_RADIUS_M, assign_stations, haversine
from humansensor.model import CATEGORY_ORDER, MG_M3, UG_M3, Category, Pollutant, Post
from humansensor.pipeline import correlate
from humansensor.sentinel import HOUR, Verdict, assess_readings, detect_alerts, emit_advisories, epa_check, exceedances
from humansensor.synth import PipelineOutputs, SynthConfig, oracle_check, full_scale_config, synth_generate

W, P, T, H = Category.WEATHER, Category.POLLUTION, Category.TRAFFIC, Category.HEALTH


@contextlib.contextmanager
def criterion(number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE_RESULTS.append(f"FAIL  {number}. {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})")
        raise
    ACCEPTANCE_RESULTS.append(f"PASS  {number}. {title} ({time.perf_counter() - start:.2f} s)")


def test_1_window_join_exactness():
    with criterion(1, "window join equals brute force on 50 random instances, < 10 s"):
        start = time.perf_counter()
        mismatches = 0
        for seed in range(50):
            rng = random.Random(seed)
            n_r, n_p = rng.randint(1, 1000), rng.randint(0, 5000)
            span = rng.choice([3600 * 24, 3600 * 24 * 30])
            readings = [make_reading(T0 + rng.randrange(span), 1.0) for _ in range(n_r)]
            posts = [tagged(i, T0 + rng.randrange(span), *rng.sample(CATEGORY_ORDER, rng.randint(1, 3))) for i in range(n_p)]
            pairs = window_counts(readings, posts)
            rt = np.array([r.timestamp for r in readings])[:, None]
            for c in CATEGORY_ORDER:
                pt = np.array([p.timestamp for p in posts if c in p.categories], dtype=np.int64)[None, :]
                expected = ((pt > rt) & (pt <= rt + 7200)).sum(axis=1)
                mismatches += int(np.sum(np.array([p.count(c) for p in pairs]) != expected))
        elapsed = time.perf_counter() - start
        assert mismatches == 0
        assert elapsed < 10, f"{elapsed:.1f} s"


def _oracle_box(values, fence=1.5):
    xs = sorted(values)
    n = len(xs)
    if n == 0:
        return None

    def q(p):
        pos = (n - 1) * p
        i = int(pos)
        return xs[i] if i == n - 1 else xs[i] + (xs[i + 1] - xs[i]) * (pos - i)

    q1, med, q3 = q(0.25), q(0.5), q(0.75)
    lo, hi = q1 - fence * (q3 - q1), q3 + fence * (q3 - q1)
    inside = [v for v in xs if lo <= v <= hi]
    return min(inside[0], q1), q1, med, q3, max(inside[-1], q3), tuple(v for v in xs if v < lo or v > hi)


def test_2_bucket_statistics_oracle():
    with criterion(2, "bucket_stats equals sort-and-interpolate oracle on 1000 random buckets"):
        rng = random.Random(2)
        with_outliers = 0
        for i in range(1000):
            n = rng.randint(0, 200)
            vals = [rng.lognormvariate(4, 0.6) for _ in range(n)]
            if i % 3 == 0 and vals:
                vals += [rng.uniform(0, 5000) for _ in range(rng.randint(1, 5))]
            counts = [rng.randint(0, 15) for _ in vals]
            k = rng.randint(1, 12)
            pairs = [WindowedPair(make_reading(T0 + j, v), {c: n_ if c is W else 0 for c in CATEGORY_ORDER})
                     for j, (v, n_) in enumerate(zip(vals, counts))]
            s = bucket_stats(pairs, k, W)
            expected = _oracle_box([v for v, c in zip(vals, counts) if c >= k])
            if expected is None:
                assert s.empty
                continue
            assert (s.whisker_low, s.q1, s.median, s.q3, s.whisker_high, s.outliers) == expected
            with_outliers += bool(s.outliers)
        assert with_outliers > 100


def _sweep(ds, pollutant, category):
    result = correlate(ds.posts, ds.readings, ds.stations, lexicon_classify_all(ds.posts, load_lexicon()),
                       categories=[category], pollutants=[pollutant])
    return result.buckets[(ds.stations[0].id, pollutant, category)]


def test_3_monotone_coupling():
    with criterion(3, "coupled medians non-decreasing in k, k=5 range within k=1, g=0 flat within band, < 60 s"):
        start = time.perf_counter()
        coupled = synth_generate(SynthConfig(seed=11, hours=24 * 365, noise_rate=9.0, gain=0.05))
        assert len(coupled.posts) >= 100_000 * 0.9
        # post rates follow the driver pollutant only, so that is the coupled pair
        assert coupled.manifest["config"]["driver"] == "PM25"
        sweep = _sweep(coupled, Pollutant.PM25, W)
        medians = [s.median for s in sweep]
        assert all(b >= a for a, b in zip(medians, medians[1:])), medians
        for pollutant in (Pollutant.PM25, Pollutant.CO):
            sweep = _sweep(coupled, pollutant, W)
            assert sweep[0].raw_min <= sweep[4].raw_min and sweep[4].raw_max <= sweep[0].raw_max

        flat = synth_generate(SynthConfig(seed=12, hours=24 * 365, base_rate=6.5, noise_rate=5.0, gain=0.0))
        assert len(flat.posts) >= 100_000 * 0.9
        bands = flat.manifest["analytic"]["median_band_95"]
        for pollutant in (Pollutant.PM25, Pollutant.CO):
            sweep = _sweep(flat, pollutant, W)
            band = bands[f"gz-embassy|{pollutant.value}|Weather"]
            assert sweep[9].n > 0
            assert abs(sweep[9].median - sweep[0].median) < band["10"] + band["1"], (pollutant, sweep[0].median, sweep[9].median)
        elapsed = time.perf_counter() - start
        assert elapsed < 60, f"{elapsed:.1f} s"


@pytest.fixture(scope="module")
def full_scale():
    return synth_generate(full_scale_config(seed=0))


@pytest.mark.slow
def test_4_scale_throughput(full_scale):
    with criterion(4, "classification + assignment + window join over 1.5M posts and 4 stations, < 60 s"):
        ds = full_scale
        assert len(ds.posts) >= 1_500_000 and len(ds.stations) == 4
        start = time.perf_counter()
        classified = lexicon_classify_all(ds.posts, load_lexicon())
        assignments = assign_stations(ds.posts, ds.stations)
        result = correlate(ds.posts, ds.readings, ds.stations, classified)
        elapsed = time.perf_counter() - start
        assert len(assignments) == len(ds.posts)
        assert len(result.buckets) == 4 * 2 * 4
        assert elapsed < 60, f"{elapsed:.1f} s"


def test_5_geodesy():
    with criterion(5, "closed-form arcs within 0.1%, symmetry and triangle inequality on 10^4 triples"):
        assert haversine((0, 0), (0, 1)) == pytest.approx(111_194.9, rel=1e-3)
        assert haversine((0, 0), (0, 180)) == pytest.approx(math.pi * EARTH_RADIUS_M, rel=1e-3)
        rng = np.random.default_rng(5)
        pts = np.column_stack([rng.uniform(-90, 90, (10_000, 3)), rng.uniform(-180, 180, (10_000, 3))])
        for row in pts:
            a, b, c = (row[0], row[3]), (row[1], row[4]), (row[2], row[5])
            ab, ba = haversine(a, b), haversine(b, a)
            assert ab == pytest.approx(ba, rel=1e-12, abs=1e-9)
            assert haversine(a, c) <= (ab + haversine(b, c)) * (1 + 1e-9) + 1e-6


def test_6_classifier_contracts():
    with criterion(6, "NB normalisation and hand-computed smoothing, SVM objective and separability, multi-category dictionary example"):
        model = nb_train([(["haze", "fog"], W), (["jam"], T)], alpha=1.0)
        post = nb_posteriors(model, ["haze"])
        assert post[W] == pytest.approx(8 / 13, abs=1e-12) and post[T] == pytest.approx(5 / 13, abs=1e-12)
        rng = random.Random(6)
        vocab = ["haze", "fog", "jam", "smog", "cough", "x", "y"]
        corpus = [([rng.choice(vocab) for _ in range(rng.randint(0, 6))], rng.choice(CATEGORY_ORDER + (None,))) for _ in range(200)]
        big = nb_train(corpus, alpha=0.7)
        for _ in range(500):
            doc = [rng.choice(vocab + ["unseen"]) for _ in range(rng.randint(0, 12))]
            assert abs(sum(nb_posteriors(big, doc).values()) - 1) <= 1e-9

        data = np.random.default_rng(6)
        X = np.vstack([data.normal([2, 2, 0, 0], 0.4, (50, 4)), data.normal([-2, -2, 0, 0], 0.4, (50, 4))])
        labels = {W: [True] * 50 + [False] * 50, T: [False] * 50 + [True] * 50}
        svm = svm_train(X, labels, lam=1e-3, epochs=25, seed=6)
        for hist in svm.history.values():
            assert all(b <= a + 1e-6 for a, b in zip(hist, hist[1:]))
        hits = sum(svm_classify(svm, x)[0] == ({W} if i < 50 else {T}) for i, x in enumerate(X))
        assert hits / len(X) == 1.0
        svm2 = svm_train(np.array([[1.0, 0.0], [0.0, 1.0]]), {H: [True, False]}, epochs=30, seed=1)
        assert svm_classify(svm2, [1.0, 0.0])[0] == {H} and svm_classify(svm2, [0.0, 1.0])[0] == set()

        p = Post("1", "u", T0, 22.3, 114.2, "gray sky and traffic jams")
        assert lexicon_classify(p, load_lexicon()).categories == {P, W, T}


def test_7_epa_and_alert_semantics():
    with criterion(7, "EPA boundary examples, alerts anti-monotone in k, alarms replay"):
        assert epa_check(1.5, Pollutant.CO, MG_M3) is Verdict.COMPLIANT
        assert epa_check(659.0, Pollutant.PM25, UG_M3) is Verdict.EXCEEDED
        assert epa_check(188.0, Pollutant.NO2, UG_M3) is Verdict.COMPLIANT
        rng = random.Random(7)
        fixtures = []
        burst = [make_reading(T0 + h * HOUR, 150.0) for h in range(24)]
        fixtures.append((burst, {"gz-embassy": [tagged(i, T0 + 24 * HOUR + 60 * i) for i in range(12)]}))
        for _ in range(20):
            readings = [make_reading(T0 + h * HOUR, rng.uniform(0, 200)) for h in range(72)]
            posts = [tagged(i, T0 + rng.randrange(74 * HOUR)) for i in range(rng.randint(0, 600))]
            fixtures.append((readings, {"gz-embassy": posts}))
        alarms = 0
        for readings, posts in fixtures:
            previous = None
            assessed = assess_readings(readings)
            verdict_at = {a.reading.timestamp: a.verdict for a in assessed}
            for k in range(1, 16):
                alerts = detect_alerts(posts, readings, k, W)
                keys = {(a.station_id, a.start) for a in alerts}
                if previous is not None:
                    assert keys <= previous
                previous = keys
                for rec in emit_advisories(alerts, exceedances(assessed)):
                    if rec.severity != "alarm":
                        continue
                    alarms += 1
                    recount = sum(rec.timestamp < p.timestamp <= rec.timestamp + 7200 for p in posts["gz-embassy"])
                    assert recount == rec.count >= rec.k
                    assert verdict_at[rec.timestamp] is Verdict.EXCEEDED
        assert alarms > 0


def test_8_audit_protocol(tmp_path):
    with criterion(8, "audit emits 10 disjoint 100-post subsets deterministically, precision 0.88 on 88/100"):
        from humansensor.cli import main
        from humansensor.model import ClassifiedPost
        from humansensor.store import write_classified

        pool = [ClassifiedPost(f"p{i}", T0 + i, frozenset({W}), "lexicon", {}) for i in range(1000)]
        write_classified(tmp_path / "c.jsonl", pool)
        contents = []
        for run in ("a", "b"):
            assert main(["audit", "--classified", str(tmp_path / "c.jsonl"), "--store", str(tmp_path / "none"),
                         "--seed", "8", "--out", str(tmp_path / run)]) == 0
            files = sorted((tmp_path / run).glob("audit_*.csv"))
            assert len(files) == 10
            contents.append([f.read_bytes() for f in files])
        assert contents[0] == contents[1]
        ids = [line.split(b",")[0] for body in contents[0] for line in body.splitlines()[1:]]
        assert len(ids) == 1000 and len(set(ids)) == 1000
        assert all(len(body.splitlines()) == 101 for body in contents[0])
        assert audit_sample(pool, seed=8) == audit_sample(pool, seed=8)

        vfile = tmp_path / "v.csv"
        vfile.write_text("post_id,correct\n" + "".join(f"p{i},{int(i < 88)}\n" for i in range(100)))
        from humansensor.classify import read_verdicts

        assert precision_estimate(read_verdicts([vfile])) == 0.88


def test_9_fault_sensitivity():
    with criterion(9, "oracle_check clean on an honest run, exactly the injected diff under a single-count fault"):
        ds = synth_generate(SynthConfig(seed=9, hours=24 * 20, station_ids=("central", "mongkok"), gain=0.1))
        classified = lexicon_classify_all(ds.posts, load_lexicon())
        outputs = correlate(ds.posts, ds.readings, ds.stations, classified).to_outputs()
        assert oracle_check(outputs, ds.manifest, ds.stations).ok
        rng = random.Random(9)
        for _ in range(5):
            key = rng.choice(sorted(outputs.pairs, key=str))
            idx = rng.randrange(len(outputs.pairs[key]))
            pairs = {k: list(v) for k, v in outputs.pairs.items()}
            t, v, c = pairs[key][idx]
            delta = rng.choice([-1, 1]) if c > 0 else 1
            pairs[key][idx] = (t, v, c + delta)
            report = oracle_check(PipelineOutputs(pairs, outputs.buckets), ds.manifest, ds.stations)
            assert len(report.diffs) == 1
            d = report.diffs[0]
            assert (d.station, d.pollutant, d.category, d.reading_ts, d.field) == (key[0], key[1].value, key[2].value, t, "count")
            assert d.actual - d.expected == delta
