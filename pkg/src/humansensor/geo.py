"""Great-circle distances and station-radius assignment of posts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Post, Station

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GeoConfig:
    radius_m: float = 5000.0
    earth_radius_m: float = EARTH_RADIUS_M
    # "all": every station within radius; "nearest": only the closest one
    mode: str = "all"

    def __post_init__(self) -> None:
        if not self.radius_m > 0:
            raise ValueError("radius_m must be positive")
        if self.mode not in ("all", "nearest"):
            raise ValueError(f"unknown assignment mode {self.mode!r}")


@dataclass(frozen=True, slots=True)
class StationAssignment:
    post_id: str
    # (station id, distance in metres), ascending by distance then id
    stations: tuple[tuple[str, float], ...]

    @property
    def station_ids(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.stations)


def haversine(a: tuple[float, float], b: tuple[float, float], radius: float = EARTH_RADIUS_M) -> float:
    """Distance in metres between two (lat, lon) points given in degrees."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(min(1.0, h)))


def haversine_many(lats, lons, lat0: float, lon0: float, radius: float = EARTH_RADIUS_M) -> np.ndarray:
    """Vectorised :func:`haversine` from arrays of points to one fixed point."""
    lat1 = np.radians(np.asarray(lats, dtype=float))
    lon1 = np.radians(np.asarray(lons, dtype=float))
    lat2, lon2 = math.radians(lat0), math.radians(lon0)
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * math.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def assign_stations(
    posts: Sequence[Post], stations: Sequence[Station], cfg: GeoConfig = GeoConfig()
) -> list[StationAssignment]:
    """Assign each post to the stations lying within ``cfg.radius_m`` (inclusive).

    Posts with no station in range are dropped. Output keeps the input post order.
    """
    if not posts or not stations:
        return []
    lats = np.fromiter((p.lat for p in posts), dtype=float, count=len(posts))
    lons = np.fromiter((p.lon for p in posts), dtype=float, count=len(posts))
    dist = np.stack([haversine_many(lats, lons, s.lat, s.lon, cfg.earth_radius_m) for s in stations], axis=1)
    inside = dist <= cfg.radius_m
    hit_rows = np.flatnonzero(inside.any(axis=1))

    ids = [s.id for s in stations]
    out: list[StationAssignment] = []
    for i in hit_rows.tolist():
        row = dist[i]
        cols = np.flatnonzero(inside[i]).tolist()
        pairs = sorted(((float(row[j]), ids[j]) for j in cols))
        if cfg.mode == "nearest":
            pairs = pairs[:1]
        out.append(StationAssignment(posts[i].id, tuple((sid, d) for d, sid in pairs)))
    return out


def posts_by_station(
    posts: Sequence[Post], assignments: Sequence[StationAssignment]
) -> dict[str, list[Post]]:
    """Group posts under every station they were assigned to.

    ``assignments`` must come from :func:`assign_stations` on the same posts, so
    both sequences share one order and can be walked together.
    """
    grouped: dict[str, list[Post]] = {}
    it = iter(posts)
    for a in assignments:
        post = next(it)
        while post.id != a.post_id:
            post = next(it)
        for sid in a.station_ids:
            grouped.setdefault(sid, []).append(post)
    return grouped
