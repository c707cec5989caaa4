"""Parsing and validation of post, reading and station files.

Record-level problems are collected as :class:`RecordError` entries and never
abort a parse; only a stream that is not valid UTF-8 is fatal.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .model import (
    Pollutant,
    Post,
    RecordError,
    SensorReading,
    Station,
    ValidationError,
    canonical_unit,
    normalize_text,
)

Source = Union[bytes, str, Path, IO[bytes]]

POST_FIELDS = ("id", "user_id", "ts", "lat", "lon", "text")
READING_FIELDS = ("station_id", "ts", "pollutant", "value", "unit")
STATION_FIELDS = ("id", "name", "lat", "lon", "city")


def _read_text(source: Source) -> str:
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"stream is not valid UTF-8: {exc}") from exc
    return text.removeprefix("﻿")


def parse_timestamp(value: object) -> int:
    """Convert an ISO-8601 string with explicit offset, or epoch seconds, to UTC epoch seconds."""
    if isinstance(value, bool):
        raise ValueError("bad timestamp")
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise ValueError("bad timestamp")
        return math.floor(value)
    if not isinstance(value, str) or not value.strip():
        raise ValueError("missing timestamp")
    text = value.strip()
    if text.isdigit():
        return int(text)
    if text[-1] in "zZ":
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"bad timestamp {value!r}") from None
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise ValueError("naive timestamp (explicit UTC offset required)")
    return math.floor(dt.timestamp())


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _float(value: object, name: str) -> float:
    if isinstance(value, bool) or value is None or value == "":
        raise ValueError(f"missing {name}")
    try:
        out = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise ValueError(f"bad {name} {value!r}") from None
    if not math.isfinite(out):
        raise ValueError(f"bad {name} {value!r}")
    return out


def _str(value: object, name: str) -> str:
    if value is None:
        raise ValueError(f"missing {name}")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = str(value)
    if not isinstance(value, str):
        raise ValueError(f"bad {name}")
    return value


def _post_from_mapping(rec: dict) -> Post:
    missing = [k for k in POST_FIELDS if k not in rec]
    if missing:
        raise ValueError("missing field(s): " + ",".join(missing))
    lat = _float(rec["lat"], "lat")
    lon = _float(rec["lon"], "lon")
    if not -90.0 <= lat <= 90.0:
        raise ValueError("lat out of range")
    if not -180.0 <= lon <= 180.0:
        raise ValueError("lon out of range")
    post_id = _str(rec["id"], "id").strip()
    if not post_id:
        raise ValueError("empty id")
    ts = parse_timestamp(rec["ts"])
    if ts <= 0:
        raise ValueError("timestamp must be positive")
    return Post(
        id=post_id,
        user_id=_str(rec["user_id"], "user_id").strip(),
        timestamp=ts,
        lat=lat,
        lon=lon,
        text=normalize_text(_str(rec["text"], "text")),
    )


def _jsonl_records(text: str) -> Iterator[tuple[int, object]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, ValueError(f"invalid JSON: {exc.msg}")


def _csv_records(text: str, fields: Iterable[str]) -> Iterator[tuple[int, object]]:
    lines = [ln for ln in text.splitlines(keepends=True) if not ln.lstrip().startswith("#")]
    if not lines:
        return
    reader = csv.DictReader(io.StringIO("".join(lines)), restkey="__extra__")
    header = reader.fieldnames or []
    absent = [f for f in fields if f not in header]
    if absent:
        raise ValidationError("CSV header lacks column(s): " + ",".join(absent))
    for row in reader:
        if "__extra__" in row:
            yield reader.line_num, ValueError("too many columns")
        elif any(v is None for v in row.values()):
            yield reader.line_num, ValueError("too few columns")
        else:
            yield reader.line_num, row


def parse_posts(source: Source, fmt: str = "jsonl") -> tuple[list[Post], list[RecordError]]:
    """Parse a posts file; returns the valid posts in input order and the record errors."""
    text = _read_text(source)
    if fmt == "jsonl":
        records = _jsonl_records(text)
    elif fmt == "csv":
        records = _csv_records(text, POST_FIELDS)
    else:
        raise ValueError(f"unsupported posts format {fmt!r}")
    posts: list[Post] = []
    errors: list[RecordError] = []
    for lineno, rec in records:
        if isinstance(rec, Exception):
            errors.append(RecordError(lineno, str(rec)))
            continue
        if not isinstance(rec, dict):
            errors.append(RecordError(lineno, "record is not an object"))
            continue
        try:
            posts.append(_post_from_mapping(rec))
        except ValueError as exc:
            errors.append(RecordError(lineno, str(exc)))
    return posts, errors


def _reading_from_row(row: dict) -> SensorReading:
    station = (row["station_id"] or "").strip()
    if not station:
        raise ValueError("empty station_id")
    pollutant = Pollutant.parse(row["pollutant"])
    value = _float(row["value"].strip(), "value")
    if value < 0:
        raise ValueError("negative value")
    unit = canonical_unit(row["unit"])
    return SensorReading(station, parse_timestamp(row["ts"]), pollutant, value, unit)


def parse_readings(source: Source, fmt: str = "csv") -> tuple[list[SensorReading], list[RecordError]]:
    if fmt != "csv":
        raise ValueError(f"unsupported readings format {fmt!r}")
    readings: list[SensorReading] = []
    errors: list[RecordError] = []
    for lineno, rec in _csv_records(_read_text(source), READING_FIELDS):
        if isinstance(rec, Exception):
            errors.append(RecordError(lineno, str(rec)))
            continue
        try:
            readings.append(_reading_from_row(rec))  # type: ignore[arg-type]
        except ValueError as exc:
            errors.append(RecordError(lineno, str(exc)))
    return readings, errors


def load_station_registry(source: Source | None = None) -> list[Station]:
    """Load and validate a station registry; ``None`` loads the built-in default.

    Unlike post and reading files, any bad row invalidates the whole registry.
    """
    if source is None:
        source = resources.files("humansensor.data").joinpath("stations.csv").read_bytes()
    stations: list[Station] = []
    seen: set[str] = set()
    for lineno, rec in _csv_records(_read_text(source), STATION_FIELDS):
        if isinstance(rec, Exception):
            raise ValidationError(f"line {lineno}: {rec}")
        try:
            station = Station(
                id=rec["id"].strip(),  # type: ignore[index]
                name=rec["name"].strip(),  # type: ignore[index]
                lat=_float(rec["lat"], "lat"),  # type: ignore[index]
                lon=_float(rec["lon"], "lon"),  # type: ignore[index]
                city=rec["city"].strip(),  # type: ignore[index]
            )
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
        if station.id in seen:
            raise ValidationError(f"line {lineno}: duplicate station id {station.id!r}")
        seen.add(station.id)
        stations.append(station)
    return stations


# -- serialization --------------------------------------------------------


def post_to_record(post: Post) -> dict:
    return {
        "id": post.id,
        "user_id": post.user_id,
        "ts": format_timestamp(post.timestamp),
        "lat": post.lat,
        "lon": post.lon,
        "text": post.text,
    }


def serialize_posts(posts: Iterable[Post]) -> bytes:
    lines = [json.dumps(post_to_record(p), ensure_ascii=False) for p in posts]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def _csv_bytes(header: Iterable[str], rows: Iterable[Iterable[object]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def serialize_readings(readings: Iterable[SensorReading]) -> bytes:
    return _csv_bytes(
        READING_FIELDS,
        ((r.station_id, format_timestamp(r.timestamp), r.pollutant.value, repr(r.value), r.unit) for r in readings),
    )


def serialize_stations(stations: Iterable[Station]) -> bytes:
    return _csv_bytes(STATION_FIELDS, ((s.id, s.name, repr(s.lat), repr(s.lon), s.city) for s in stations))


def serialize_errors(errors: Iterable[RecordError]) -> bytes:
    return _csv_bytes(("line", "reason"), ((e.line, e.reason) for e in errors))
