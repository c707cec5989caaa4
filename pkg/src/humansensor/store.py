"""On-disk staging between CLI commands and the per-run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from . import __version__
from .ingest import format_timestamp, load_station_registry, parse_posts, parse_readings, parse_timestamp
from .model import CATEGORY_ORDER, Category, ClassifiedPost, Post, SensorReading, Station, ValidationError

POSTS_FILE = "posts.jsonl"
READINGS_FILE = "readings.csv"
STATIONS_FILE = "stations.csv"
MANIFEST_SUFFIX = ".manifest.json"


def default_store() -> Path:
    return Path(os.environ.get("HS_DATA_DIR", "hs_data"))


@dataclass
class Store:
    posts: list[Post]
    readings: list[SensorReading]
    stations: list[Station]


def load_store(path: str | Path) -> Store:
    root = Path(path)
    for name in (POSTS_FILE, READINGS_FILE, STATIONS_FILE):
        if not (root / name).is_file():
            raise ValidationError(f"store {root} lacks {name}; run `hs ingest` first")
    posts, perr = parse_posts(root / POSTS_FILE)
    readings, rerr = parse_readings(root / READINGS_FILE)
    if perr or rerr:
        raise ValidationError(f"store {root} is not canonical ({len(perr)} post / {len(rerr)} reading errors)")
    return Store(posts, readings, load_station_registry(root / STATIONS_FILE))


def classified_to_record(c: ClassifiedPost) -> dict:
    cats = sorted(c.categories, key=lambda x: x.rank)
    return {
        "post_id": c.post_id,
        "ts": format_timestamp(c.timestamp),
        "categories": [x.value for x in cats],
        "method": c.method,
        "scores": {x.value: c.scores[x] for x in CATEGORY_ORDER if x in c.scores},
    }


def write_classified(path: str | Path, classified: Iterable[ClassifiedPost]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in classified:
            fh.write(json.dumps(classified_to_record(c), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_classified(path: str | Path) -> list[ClassifiedPost]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(
                    ClassifiedPost(
                        post_id=rec["post_id"],
                        timestamp=parse_timestamp(rec["ts"]),
                        categories=frozenset(Category.parse(c) for c in rec["categories"]),
                        method=rec["method"],
                        scores={Category.parse(k): float(v) for k, v in rec.get("scores", {}).items()},
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValidationError(f"{path} line {lineno}: {exc}") from exc
    return out


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance for one command run.

    Everything except ``wall_clock_s`` is a pure function of the inputs and
    flags, so reruns agree on all other fields byte for byte.
    """

    command: str
    config: dict[str, Any]
    inputs: dict[str, str] = field(default_factory=dict)
    row_counts: dict[str, int] = field(default_factory=dict)
    wall_clock_s: dict[str, float] = field(default_factory=dict)
    tool_version: str = __version__

    def add_input(self, path: str | Path) -> None:
        p = Path(path)
        if p.is_dir():
            for child in sorted(p.iterdir()):
                if child.is_file() and not child.name.endswith(MANIFEST_SUFFIX):
                    self.inputs[str(child)] = file_digest(child)
        else:
            self.inputs[str(p)] = file_digest(p)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.wall_clock_s[name] = round(time.perf_counter() - t0, 6)

    def to_json(self) -> str:
        data = {
            "command": self.command,
            "tool_version": self.tool_version,
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "row_counts": self.row_counts,
            "wall_clock_s": self.wall_clock_s,
        }
        return json.dumps(data, indent=2, sort_keys=False, default=str) + "\n"

    def write(self, output: str | Path) -> Path:
        """Write next to ``output``: ``<file>.manifest.json`` or ``<dir>/run.manifest.json``."""
        out = Path(output)
        path = out / ("run" + MANIFEST_SUFFIX) if out.is_dir() else out.with_name(out.name + MANIFEST_SUFFIX)
        path.write_text(self.to_json(), encoding="utf-8")
        return path
