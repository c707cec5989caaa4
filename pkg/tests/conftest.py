import pytest

from humansensor.classify import load_lexicon
from humansensor.model import Category, ClassifiedPost, Pollutant, Post, SensorReading, UG_M3
from humansensor.synth import SynthConfig, synth_generate

T0 = 1357632000  # 2013-01-08T08:00Z


def make_post(i, ts, text="haze", lat=23.1165, lon=113.3296):
    return Post(f"p{i}", "u1", ts, lat, lon, text)


def make_reading(ts, value, station="gz-embassy", pollutant=Pollutant.PM25, unit=UG_M3):
    return SensorReading(station, ts, pollutant, value, unit)


def tagged(i, ts, *cats):
    return ClassifiedPost(f"p{i}", ts, frozenset(cats or (Category.WEATHER,)), "lexicon", {})


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def small_synth():
    return synth_generate(SynthConfig(seed=7, hours=24 * 30))


def run_pipeline(ds, k_max=10, **kw):
    """Lexicon classification, assignment and window join over a synthetic dataset."""
    from humansensor.classify import lexicon_classify_all
    from humansensor.pipeline import correlate

    classified = lexicon_classify_all(ds.posts, load_lexicon())
    return correlate(ds.posts, ds.readings, ds.stations, classified, k_max=k_max, **kw)


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
