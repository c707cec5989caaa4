"""Humans as pollution sensors: classify geo-tagged posts, join them to
co-located pollutant readings and raise exceedance advisories."""

__version__ = "0.1.0"
