"""Zone classification: category (city / pvp / field) and level tier."""

from __future__ import annotations

import csv
import logging
import threading
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

log = logging.getLogger(__name__)

CATEGORIES = ("city", "pvp", "field")
# "novice" is the beginner tier (zones for levels 1-10).
TIERS = ("neutral", "novice", "low", "medium", "high")


@dataclass(frozen=True)
class ZoneInfo:
    name: str
    category: str
    tier: str

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown zone category {self.category!r}")
        if self.tier not in TIERS:
            raise ValueError(f"unknown zone tier {self.tier!r}")


@dataclass
class CatalogLoadReport:
    rows_read: int = 0
    duplicates: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rejected_by_reason(self) -> dict[str, int]:
        return dict(Counter(reason for _, reason in self.rejected))


class ZoneCatalog:
    """Immutable zone table with a fallback policy for unlisted names.

    Lookups are total: a name missing from the table resolves to
    ``unknown_policy`` (``field``/``neutral`` by default) and bumps
    ``unknown_hits``.
    """

    def __init__(
        self,
        entries: Iterable[ZoneInfo] = (),
        unknown_policy: ZoneInfo | None = None,
        report: CatalogLoadReport | None = None,
    ) -> None:
        self._entries: dict[str, ZoneInfo] = {}
        for info in entries:
            self._entries[info.name] = info
        self.unknown_policy = unknown_policy or ZoneInfo("<unknown>", "field", "neutral")
        self.report = report or CatalogLoadReport()
        self._unknown = Counter()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    @property
    def entries(self) -> dict[str, ZoneInfo]:
        return dict(self._entries)

    @property
    def unknown_hits(self) -> int:
        return sum(self._unknown.values())

    @property
    def unknown_names(self) -> dict[str, int]:
        return dict(self._unknown)

    def reset_counters(self) -> None:
        with self._lock:
            self._unknown.clear()

    def names_in(self, tiers: Iterable[str] | None = None,
                 categories: Iterable[str] | None = None) -> list[str]:
        """Sorted zone names restricted to the given tiers and categories."""
        tiers = set(TIERS if tiers is None else tiers)
        categories = set(CATEGORIES if categories is None else categories)
        return sorted(n for n, z in self._entries.items()
                      if z.tier in tiers and z.category in categories)


def classify_zone(catalog: ZoneCatalog, zone_name: str) -> ZoneInfo:
    info = catalog._entries.get(zone_name)
    if info is not None:
        return info
    with catalog._lock:
        catalog._unknown[zone_name] += 1
    return catalog.unknown_policy


def load_zone_catalog(stream: TextIO) -> ZoneCatalog:
    """Read ``name,category,tier`` rows (comma or tab separated).

    Lines starting with ``#`` and blank lines are skipped. Rows with an
    unknown category or tier are rejected and recorded in the catalog's
    load report; a repeated name replaces the earlier entry.
    """
    report = CatalogLoadReport()
    entries: dict[str, ZoneInfo] = {}
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        report.rows_read += 1
        delimiter = "\t" if "\t" in stripped else ","
        cells = [c.strip() for c in next(csv.reader([stripped], delimiter=delimiter))]
        if len(cells) != 3:
            report.rejected.append((lineno, "bad_column_count"))
            continue
        name, category, tier = cells[0], cells[1].lower(), cells[2].lower()
        if not name:
            report.rejected.append((lineno, "empty_name"))
            continue
        if category not in CATEGORIES:
            report.rejected.append((lineno, "bad_category"))
            continue
        if tier not in TIERS:
            report.rejected.append((lineno, "bad_tier"))
            continue
        if name in entries:
            report.duplicates += 1
            log.warning("zone catalog line %d: duplicate zone %r replaces earlier entry", lineno, name)
        entries[name] = ZoneInfo(name, category, tier)
    for lineno, reason in report.rejected:
        log.warning("zone catalog line %d rejected: %s", lineno, reason)
    return ZoneCatalog(entries.values(), report=report)


def default_catalog() -> ZoneCatalog:
    """The bundled catalog of Horde-accessible zones, instances and battlegrounds."""
    with resources.files("wowbehavior.data").joinpath("zones.csv").open(encoding="utf-8") as fh:
        return load_zone_catalog(fh)
