"""Core domain types shared by every stage of the pipeline."""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass, field
from typing import Mapping


class ValidationError(ValueError):
    """Raised when an input file or configuration fails validation."""


class Pollutant(enum.Enum):
    SO2 = "SO2"
    O3 = "O3"
    CO = "CO"
    NO = "NO"
    NO2 = "NO2"
    NOX = "NOX"
    PM10 = "PM10"
    PM25 = "PM25"

    @classmethod
    def parse(cls, text: str) -> "Pollutant":
        key = text.strip().upper().replace(".", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown pollutant {text!r}") from None

    def __str__(self) -> str:
        return self.value


class Category(enum.Enum):
    """Sentinel categories, declared in the fixed tie-breaking order."""

    POLLUTION = "Pollution"
    WEATHER = "Weather"
    TRAFFIC = "Traffic"
    HEALTH = "Health"

    @classmethod
    def parse(cls, text: str) -> "Category":
        for cat in cls:
            if cat.value.lower() == text.strip().lower():
                return cat
        raise ValueError(f"unknown category {text!r}")

    @property
    def rank(self) -> int:
        return CATEGORY_ORDER.index(self)

    def __str__(self) -> str:
        return self.value


CATEGORY_ORDER: tuple[Category, ...] = tuple(Category)

# Canonical unit spellings; ASCII aliases are accepted on input.
MG_M3 = "mg/m³"
UG_M3 = "µg/m³"
PPB = "ppb"

_UNIT_ALIASES = {
    "mg/m³": MG_M3,
    "mg/m3": MG_M3,
    "µg/m³": UG_M3,
    "μg/m³": UG_M3,  # greek mu
    "µg/m3": UG_M3,
    "μg/m3": UG_M3,
    "ug/m³": UG_M3,
    "ug/m3": UG_M3,
    "ppb": PPB,
}

LEGAL_UNITS: Mapping[Pollutant, frozenset[str]] = {
    Pollutant.CO: frozenset({MG_M3}),
    Pollutant.PM10: frozenset({UG_M3}),
    Pollutant.PM25: frozenset({UG_M3}),
    Pollutant.NO2: frozenset({UG_M3, PPB}),
    Pollutant.SO2: frozenset({UG_M3, PPB}),
    Pollutant.O3: frozenset({UG_M3, PPB}),
    Pollutant.NO: frozenset({UG_M3, PPB}),
    Pollutant.NOX: frozenset({UG_M3, PPB}),
}


def canonical_unit(text: str) -> str:
    unit = _UNIT_ALIASES.get(unicodedata.normalize("NFC", text.strip()).lower())
    if unit is None:
        raise ValueError(f"unknown unit {text!r}")
    return unit


def normalize_text(text: str) -> str:
    """NFC + case-fold, re-normalized because case-folding can decompose."""
    return unicodedata.normalize("NFC", unicodedata.normalize("NFC", text).casefold())


def check_coordinates(lat: float, lon: float) -> None:
    if not -90.0 <= lat <= 90.0:
        raise ValueError("lat out of range")
    if not -180.0 <= lon <= 180.0:
        raise ValueError("lon out of range")


@dataclass(frozen=True, slots=True)
class Post:
    id: str
    user_id: str
    timestamp: int
    lat: float
    lon: float
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("empty id")
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive")
        check_coordinates(self.lat, self.lon)


@dataclass(frozen=True, slots=True)
class SensorReading:
    station_id: str
    timestamp: int
    pollutant: Pollutant
    value: float
    unit: str

    def __post_init__(self) -> None:
        if not self.station_id:
            raise ValueError("empty station_id")
        if not self.value >= 0:  # also rejects NaN
            raise ValueError("negative value")
        if self.unit not in LEGAL_UNITS[self.pollutant]:
            raise ValueError(f"unit {self.unit} not legal for {self.pollutant}")


@dataclass(frozen=True, slots=True)
class Station:
    id: str
    name: str
    lat: float
    lon: float
    city: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("empty station id")
        check_coordinates(self.lat, self.lon)


@dataclass(frozen=True, slots=True)
class RecordError:
    line: int
    reason: str


@dataclass(frozen=True, slots=True)
class ClassifiedPost:
    """A post tagged with the sentinel categories it triggers.

    ``scores`` holds matched-term counts (lexicon), posteriors (nb) or signed
    margins (svm) keyed by category.
    """

    post_id: str
    timestamp: int
    categories: frozenset[Category]
    method: str
    scores: Mapping[Category, float] = field(default_factory=dict)

    @property
    def is_relevant(self) -> bool:
        return bool(self.categories)
