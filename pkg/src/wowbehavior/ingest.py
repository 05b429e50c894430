"""Parsing, validation and windowing of raw session-snapshot logs.

A log holds one avatar snapshot per line. The canonical layout is seven
delimiter-separated columns::

    timestamp, player_id, guild, level, race, class, zone

Other layouts (the 12-column census dump with its unnamed dummy columns)
are adapted through a :class:`ColumnMap`.
"""

from __future__ import annotations

import configparser
import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence, TextIO

log = logging.getLogger(__name__)

MIN_LEVEL = 1
MAX_LEVEL = 80
DEFAULT_TIME_FORMAT = "%Y-%m-%d %H:%M"
GUILD_PLACEHOLDERS = frozenset({"", "-"})

FIELDS = ("timestamp", "player_id", "guild", "level", "race", "class", "zone")


@dataclass(frozen=True, slots=True)
class SessionRecord:
    timestamp: datetime
    player_id: str
    guild: str | None
    level: int
    race: str
    player_class: str
    zone: str

    def to_row(self, time_format: str = DEFAULT_TIME_FORMAT) -> list[str]:
        return [
            self.timestamp.strftime(time_format),
            self.player_id,
            self.guild or "",
            str(self.level),
            self.race,
            self.player_class,
            self.zone,
        ]


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejected_by_reason: Counter = field(default_factory=Counter)
    rejected_lines: list[tuple[int, str]] = field(default_factory=list)
    distinct_players: int = 0
    date_range: tuple[datetime, datetime] | None = None

    def merge(self, other: "IngestStats") -> "IngestStats":
        """Combine stats of two shards (``other`` follows ``self``)."""
        ranges = [r for r in (self.date_range, other.date_range) if r is not None]
        merged = IngestStats(
            rows_read=self.rows_read + other.rows_read,
            rows_accepted=self.rows_accepted + other.rows_accepted,
            rows_rejected=self.rows_rejected + other.rows_rejected,
            rejected_by_reason=self.rejected_by_reason + other.rejected_by_reason,
            rejected_lines=self.rejected_lines + other.rejected_lines,
            date_range=(min(r[0] for r in ranges), max(r[1] for r in ranges)) if ranges else None,
        )
        # distinct players across shards cannot be recovered from counts alone
        merged.distinct_players = max(self.distinct_players, other.distinct_players)
        return merged

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
            "distinct_players": self.distinct_players,
            "date_range": [d.strftime(DEFAULT_TIME_FORMAT) for d in self.date_range]
            if self.date_range else None,
        }


@dataclass(frozen=True)
class ColumnMap:
    """Column index of each canonical field.

    ``n_columns`` pins the exact column count of a row; when it is None a
    row only needs enough columns to reach the largest mapped index.
    """

    timestamp: int = 0
    player_id: int = 1
    guild: int = 2
    level: int = 3
    race: int = 4
    player_class: int = 5
    zone: int = 6
    n_columns: int | None = 7

    def __post_init__(self) -> None:
        idx = self.indices()
        if any(i < 0 for i in idx):
            raise ValueError("column indices must be non-negative")
        if len(set(idx)) != len(idx):
            raise ValueError("two fields map to the same column")
        if self.n_columns is not None and self.n_columns <= max(idx):
            raise ValueError(f"n_columns={self.n_columns} too small for index {max(idx)}")

    def indices(self) -> tuple[int, ...]:
        return (self.timestamp, self.player_id, self.guild, self.level,
                self.race, self.player_class, self.zone)

    @classmethod
    def identity(cls) -> "ColumnMap":
        return cls()

    @classmethod
    def from_mapping(cls, mapping: dict[str, str | int]) -> "ColumnMap":
        kwargs: dict[str, int | None] = {}
        for key, value in mapping.items():
            key = key.strip().lower()
            if key == "class":
                key = "player_class"
            elif key == "columns":
                key = "n_columns"
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown column map key {key!r}")
            kwargs[key] = int(value)
        if "n_columns" not in kwargs:
            kwargs["n_columns"] = None
        return cls(**kwargs)

    @classmethod
    def read(cls, stream: TextIO) -> "ColumnMap":
        """Parse a ``field = column_index`` file (optional ``columns = N``)."""
        return cls.from_mapping(read_key_values(stream))


def read_key_values(stream: TextIO) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` and ``;`` start comments."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[root]\n" + stream.read())
    return dict(parser["root"])


class _Reject(Exception):
    def __init__(self, reason: str) -> None:
        self.reason = reason


def _parse_timestamp(text: str, time_format: str) -> datetime:
    if time_format == DEFAULT_TIME_FORMAT:
        # fromisoformat is an order of magnitude faster than strptime
        if len(text) != 16 or text[4] != "-" or text[10] != " ":
            raise ValueError(text)
        return datetime.fromisoformat(text)
    return datetime.strptime(text, time_format)


def parse_line(cells: Sequence[str], column_map: ColumnMap,
               time_format: str = DEFAULT_TIME_FORMAT) -> SessionRecord:
    """Build a record from one row's cells; raises ``_Reject`` on bad input."""
    cm = column_map
    if cm.n_columns is not None:
        if len(cells) != cm.n_columns:
            raise _Reject("bad_column_count")
    elif len(cells) <= max(cm.indices()):
        raise _Reject("bad_column_count")
    try:
        ts = _parse_timestamp(cells[cm.timestamp].strip(), time_format)
    except ValueError:
        raise _Reject("bad_timestamp") from None
    try:
        level = int(cells[cm.level].strip())
    except ValueError:
        raise _Reject("bad_level") from None
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise _Reject("level_out_of_range")
    player_id = cells[cm.player_id].strip()
    if not player_id:
        raise _Reject("empty_player_id")
    zone = cells[cm.zone].strip()
    if not zone:
        raise _Reject("empty_zone")
    guild = cells[cm.guild].strip()
    return SessionRecord(
        timestamp=ts.replace(second=0, microsecond=0),
        player_id=player_id,
        guild=None if guild in GUILD_PLACEHOLDERS else guild,
        level=level,
        race=cells[cm.race].strip(),
        player_class=cells[cm.player_class].strip(),
        zone=zone,
    )


def parse_session_log(
    stream: Iterable[str],
    column_map: ColumnMap | None = None,
    *,
    delimiter: str = ",",
    has_header: bool = False,
    time_format: str = DEFAULT_TIME_FORMAT,
    first_line: int = 1,
) -> tuple[list[SessionRecord], IngestStats]:
    """Parse a snapshot log into records, counting every rejected line.

    Line numbers in the rejection log start at ``first_line``, so shards of
    one file can report positions in the original.
    """
    column_map = column_map or ColumnMap.identity()
    stats = IngestStats()
    records: list[SessionRecord] = []
    players: set[str] = set()
    lo = hi = None
    reader = csv.reader(stream, delimiter=delimiter)
    for row_index, cells in enumerate(reader):
        if has_header and row_index == 0:
            continue
        lineno = reader.line_num + first_line - 1
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        stats.rows_read += 1
        try:
            rec = parse_line(cells, column_map, time_format)
        except _Reject as exc:
            stats.rows_rejected += 1
            stats.rejected_by_reason[exc.reason] += 1
            stats.rejected_lines.append((lineno, exc.reason))
            log.debug("line %d rejected: %s", lineno, exc.reason)
            continue
        records.append(rec)
        players.add(rec.player_id)
        if lo is None or rec.timestamp < lo:
            lo = rec.timestamp
        if hi is None or rec.timestamp > hi:
            hi = rec.timestamp
    stats.rows_accepted = len(records)
    stats.distinct_players = len(players)
    stats.date_range = (lo, hi) if lo is not None else None
    if stats.rows_rejected:
        log.warning("%d of %d lines rejected: %s", stats.rows_rejected, stats.rows_read,
                    dict(stats.rejected_by_reason))
    return records, stats


def write_session_log(records: Iterable[SessionRecord], stream: TextIO,
                      time_format: str = DEFAULT_TIME_FORMAT, delimiter: str = ",") -> int:
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    n = 0
    for rec in records:
        writer.writerow(rec.to_row(time_format))
        n += 1
    return n


def filter_window(records: Iterable[SessionRecord],
                  window: tuple[datetime, datetime]) -> list[SessionRecord]:
    """Records with ``start <= timestamp <= end``, in input order."""
    start, end = window
    if start > end:
        raise ValueError(f"window start {start} is after end {end}")
    return [r for r in records if start <= r.timestamp <= end]


def year_window(year: int) -> tuple[datetime, datetime]:
    return datetime(year, 1, 1, 0, 0), datetime(year, 12, 31, 23, 59)
