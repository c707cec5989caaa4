import json
import random
import unicodedata

import pytest
from hypothesis import given, strategies as st

from humansensor.ingest import (
    format_timestamp,
    load_station_registry,
    parse_posts,
    parse_readings,
    parse_timestamp,
    serialize_posts,
    serialize_readings,
)
from humansensor.model import MG_M3, UG_M3, Pollutant, ValidationError, normalize_text


def jline(**over):
    rec = {"id": "1", "user_id": "u", "ts": "2013-01-08T10:00:00Z", "lat": 22.28, "lon": 114.15, "text": "Haze again"}
    rec.update(over)
    return json.dumps(rec, ensure_ascii=False)


def test_single_valid_line():
    posts, errors = parse_posts((jline() + "\n").encode())
    assert len(posts) == 1 and errors == []
    p = posts[0]
    assert p.timestamp == 1357639200
    assert p.text == "haze again"


def test_lat_out_of_range():
    posts, errors = parse_posts(jline(lat=95).encode())
    assert posts == []
    assert [(e.line, e.reason) for e in errors] == [(1, "lat out of range")]


def test_naive_timestamp_rejected():
    posts, errors = parse_posts(jline(ts="2013-01-08T10:00:00").encode())
    assert not posts and "naive" in errors[0].reason


def test_offset_converted_to_utc():
    assert parse_timestamp("2013-01-08T18:00:00+08:00") == parse_timestamp("2013-01-08T10:00:00Z")
    assert parse_timestamp("2013-01-08T10:00Z") == 1357639200


def test_decode_failure_aborts():
    with pytest.raises(ValidationError):
        parse_posts(b"\xff\xfe" + jline().encode())


def _corrupt_fixture(n=1000, bad=(17, 404, 911), seed=3):
    rng = random.Random(seed)
    lines = []
    for i in range(1, n + 1):
        if i == bad[0]:
            lines.append('{"id": "x", "ts": ')  # truncated JSON
        elif i == bad[1]:
            lines.append(jline(id=str(i), lon=-200))
        elif i == bad[2]:
            lines.append(jline(id=str(i), ts="yesterday"))
        else:
            lines.append(jline(id=str(i), lat=rng.uniform(-90, 90), lon=rng.uniform(-180, 180)))
    return "\n".join(lines) + "\n"


def _line_oracle(text):
    """Independent recount: a line is valid iff it is a JSON object with legal coordinates and an aware ISO timestamp."""
    good = bad = 0
    for line in text.splitlines():
        try:
            rec = json.loads(line)
            ok = -90 <= rec["lat"] <= 90 and -180 <= rec["lon"] <= 180 and rec["ts"].endswith("Z")
        except Exception:
            ok = False
        good += ok
        bad += not ok
    return good, bad


def test_thousand_lines_three_corrupt():
    text = _corrupt_fixture()
    assert _line_oracle(text) == (997, 3)
    posts, errors = parse_posts(text.encode())
    assert (len(posts), len(errors)) == (997, 3)
    assert [e.line for e in errors] == [17, 404, 911]
    # order preserved
    assert [p.id for p in posts] == [str(i) for i in range(1, 1001) if i not in (17, 404, 911)]


def test_csv_posts():
    data = "id,user_id,ts,lat,lon,text\n1,u,2013-01-08T10:00:00Z,22.3,114.2,\"fog, again\"\n2,u,2013-01-08T10:00:00Z,99,114.2,x\n"
    posts, errors = parse_posts(data.encode(), "csv")
    assert [p.text for p in posts] == ["fog, again"]
    assert errors[0].line == 3 and errors[0].reason == "lat out of range"


def test_round_trip_is_canonical():
    raw = jline(ts="2013-01-08T18:00:00+08:00", text="Ｇray Sky ÉTÉ") + "\n"
    posts, _ = parse_posts(raw.encode())
    once = serialize_posts(posts)
    again, _ = parse_posts(once)
    assert serialize_posts(again) == once
    rec = json.loads(once)
    assert rec["ts"] == "2013-01-08T10:00:00Z"
    assert rec["text"] == normalize_text("Ｇray Sky ÉTÉ")


@given(st.text())
def test_normalization_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once
    assert unicodedata.is_normalized("NFC", once)


@given(st.lists(st.tuples(st.booleans(), st.floats(-100, 100, allow_nan=False)), max_size=40))
def test_count_conservation(rows):
    lines = [jline(id=str(i), lat=lat) if valid else "not json" for i, (valid, lat) in enumerate(rows)]
    posts, errors = parse_posts("\n".join(lines).encode())
    assert len(posts) + len(errors) == len(rows)


READINGS_HEADER = "station_id,ts,pollutant,value,unit\n"


def test_reading_row():
    readings, errors = parse_readings((READINGS_HEADER + "central,2013-01-08T10:00Z,CO,1.2,mg/m³\n").encode())
    assert errors == []
    r = readings[0]
    assert (r.station_id, r.timestamp, r.pollutant, r.value, r.unit) == ("central", 1357639200, Pollutant.CO, 1.2, MG_M3)


def test_negative_value():
    _, errors = parse_readings((READINGS_HEADER + "central,2013-01-08T10:00Z,CO,-1,mg/m³\n").encode())
    assert errors[0].reason == "negative value"


def test_max_pm25_accepted():
    readings, errors = parse_readings((READINGS_HEADER + "gz-embassy,2013-12-13T10:00Z,PM25,659,µg/m³\n").encode())
    assert errors == [] and readings[0].value == 659.0 and readings[0].unit == UG_M3


@pytest.mark.parametrize(
    "row,reason",
    [
        ("central,2013-01-08T10:00Z,CO,1.2,µg/m³", "not legal"),
        ("central,2013-01-08T10:00Z,PM25,10,ppb", "not legal"),
        ("central,2013-01-08T10:00Z,XYZ,1,ppb", "unknown pollutant"),
        ("central,2013-01-08T10:00Z,CO,1.2", "too few columns"),
    ],
)
def test_reading_errors(row, reason):
    readings, errors = parse_readings((READINGS_HEADER + row + "\n").encode())
    assert not readings and reason in errors[0].reason


def test_no2_in_ppb_and_ascii_units():
    text = READINGS_HEADER + "central,2013-01-08T10:00Z,NO2,100,ppb\ncentral,2013-01-08T10:00Z,pm2.5,30,ug/m3\n"
    readings, errors = parse_readings(text.encode())
    assert not errors
    assert readings[1].pollutant is Pollutant.PM25 and readings[1].unit == UG_M3


def test_readings_round_trip():
    text = READINGS_HEADER + "central,2013-01-08T10:00:00Z,CO,1.2,mg/m³\nmongkok,2013-01-08T11:00:00Z,NO2,87.5,µg/m³\n"
    readings, _ = parse_readings(text.encode())
    assert serialize_readings(readings).decode() == text


def test_default_registry():
    stations = load_station_registry()
    assert [s.name for s in stations] == ["Central", "Causeway Bay", "Mongkok", "American Embassy (Guangzhou)"]
    assert {s.city for s in stations} == {"Hong Kong", "Guangzhou"}


def test_default_registry_marks_coordinates_as_configuration():
    from importlib import resources

    text = resources.files("humansensor.data").joinpath("stations.csv").read_text()
    assert "implementer-supplied" in text


def test_empty_registry():
    assert load_station_registry(b"") == []
    assert load_station_registry(b"id,name,lat,lon,city\n") == []


def test_duplicate_station_id():
    data = b"id,name,lat,lon,city\na,A,1,1,X\na,B,2,2,X\n"
    with pytest.raises(ValidationError, match="duplicate"):
        load_station_registry(data)


def test_station_out_of_range():
    with pytest.raises(ValidationError, match="lon out of range"):
        load_station_registry(b"id,name,lat,lon,city\na,A,1,181,X\n")


def test_format_timestamp():
    assert format_timestamp(1357639200) == "2013-01-08T10:00:00Z"
