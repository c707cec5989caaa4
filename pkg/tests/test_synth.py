import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import run_pipeline
from humansensor.classify import lexicon_classify
from humansensor.model import Category, Pollutant
from humansensor.synth import (
    PipelineOutputs,
    SynthConfig,
    hourly_correlation,
    oracle_check,
    synth_generate,
    with_seed,
    write_dataset,
)

W = Category.WEATHER
GZ = "gz-embassy"


def test_same_seed_byte_identical(tmp_path):
    cfg = SynthConfig(seed=3, hours=24 * 5)
    a = write_dataset(synth_generate(cfg), tmp_path / "a")
    b = write_dataset(synth_generate(cfg), tmp_path / "b")
    for name in a:
        assert a[name].read_bytes() == b[name].read_bytes()
    c = write_dataset(synth_generate(with_seed(cfg, 4)), tmp_path / "c")
    assert a["posts"].read_bytes() != c["posts"].read_bytes()


def test_config_round_trip():
    cfg = SynthConfig(seed=9, station_ids=("central", GZ), station_scale={GZ: 2.0})
    assert SynthConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_bad_config():
    with pytest.raises(ValueError):
        SynthConfig(gain=-1)
    with pytest.raises(ValueError):
        SynthConfig(category_weights={W: 0.5})


@pytest.mark.parametrize("seed", range(5))
def test_zero_gain_correlation_within_band(seed):
    ds = synth_generate(SynthConfig(seed=seed, hours=24 * 60, gain=0.0))
    band = ds.manifest["analytic"]["correlation_band_95"]
    for pol in (Pollutant.PM25, Pollutant.CO):
        assert abs(hourly_correlation(ds.manifest, GZ, pol)) < band


def test_positive_gain_correlation_exceeds_band(small_synth):
    band = small_synth.manifest["analytic"]["correlation_band_95"]
    assert hourly_correlation(small_synth.manifest, GZ, Pollutant.PM25) > band


def test_lexicon_recovers_ground_truth(small_synth, lexicon):
    truth = {row[0]: set(row[5]) for row in small_synth.manifest["posts"]}
    for post in small_synth.posts:
        got = {c.value for c in lexicon_classify(post, lexicon).categories}
        assert got == truth[post.id]


def test_posts_inside_station_radius(small_synth):
    from humansensor.geo import haversine

    st = small_synth.stations[0]
    assert all(haversine((p.lat, p.lon), (st.lat, st.lon)) <= 5000 for p in small_synth.posts)


def test_oracle_clean_run(small_synth):
    result = run_pipeline(small_synth)
    report = oracle_check(result.to_outputs(), small_synth.manifest, small_synth.stations)
    assert report.ok and report.checked_counts > 0 and report.checked_buckets == 2 * 4 * 10


def _tamper_count(outputs, key, index, delta=1):
    pairs = {k: list(v) for k, v in outputs.pairs.items()}
    t, v, c = pairs[key][index]
    pairs[key][index] = (t, v, c + delta)
    return PipelineOutputs(pairs, outputs.buckets), t


def test_single_count_fault_gives_one_diff(small_synth):
    outputs = run_pipeline(small_synth).to_outputs()
    key = (GZ, Pollutant.PM25, W)
    tampered, t = _tamper_count(outputs, key, 100)
    report = oracle_check(tampered, small_synth.manifest, small_synth.stations)
    assert len(report.diffs) == 1
    d = report.diffs[0]
    assert (d.station, d.pollutant, d.category, d.reading_ts, d.field) == (GZ, "PM25", "Weather", t, "count")
    assert d.actual == d.expected + 1


def test_bucket_fault_gives_one_diff(small_synth):
    outputs = run_pipeline(small_synth).to_outputs()
    key = (GZ, Pollutant.CO, Category.TRAFFIC)
    buckets = {k: list(v) for k, v in outputs.buckets.items()}
    s = buckets[key][2]
    buckets[key][2] = replace(s, median=s.median + 0.01)
    report = oracle_check(PipelineOutputs(outputs.pairs, buckets), small_synth.manifest, small_synth.stations)
    assert [(d.k, d.field) for d in report.diffs] == [(3, "median")]


def test_value_fault_detected(small_synth):
    outputs = run_pipeline(small_synth).to_outputs()
    key = (GZ, Pollutant.PM25, Category.HEALTH)
    pairs = {k: list(v) for k, v in outputs.pairs.items()}
    t, v, c = pairs[key][0]
    pairs[key][0] = (t, v + 1, c)
    report = oracle_check(PipelineOutputs(pairs, outputs.buckets), small_synth.manifest, small_synth.stations)
    assert [d.field for d in report.diffs] == ["value"]


@pytest.mark.slow
def test_fifty_run_sweep():
    for seed in range(50):
        cfg = SynthConfig(seed=1000 + seed, hours=24 * 4, station_ids=("central", "causeway-bay"), gain=0.1)
        ds = synth_generate(cfg)
        report = oracle_check(run_pipeline(ds).to_outputs(), ds.manifest, ds.stations)
        assert report.ok, (seed, report.diffs[:3])


def test_monotone_coupling_across_seeds():
    """Mean hourly on-topic counts rise with the gain, beyond the Poisson standard error."""
    means = {}
    for g in (0.0, 0.05, 0.1):
        per_seed = []
        for seed in range(5):
            ds = synth_generate(SynthConfig(seed=seed, hours=24 * 30, gain=g))
            sm = ds.manifest["stations"][GZ]
            per_seed.append((np.mean(sm["on_topic_counts"]), np.sum(sm["latent_rate"]) / len(sm["latent_rate"]) ** 2))
        mean = np.mean([m for m, _ in per_seed])
        var = np.sum([v for _, v in per_seed]) / len(per_seed) ** 2
        means[g] = (mean, var)
    for lo, hi in ((0.0, 0.05), (0.05, 0.1)):
        (m1, v1), (m2, v2) = means[lo], means[hi]
        assert m2 - m1 > 3 * np.sqrt(v1 + v2)


def test_manifest_contents(small_synth):
    m = small_synth.manifest
    sm = m["stations"][GZ]
    assert len(sm["latent_rate"]) == 24 * 30
    assert sum(sm["on_topic_counts"]) + sum(sm["off_topic_counts"]) == len(small_synth.posts)
    assert set(m["analytic"]["median_band_95"][f"{GZ}|PM25|Weather"]) == {str(k) for k in range(1, 11)}
    n_exp = m["analytic"]["expected_bucket_n"][f"{GZ}|Weather"]
    assert all(n_exp[str(k + 1)] <= n_exp[str(k)] for k in range(1, 10))
