"""Per-player feature profiles aggregated from session snapshots."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .ingest import SessionRecord
from .zones import CATEGORIES, TIERS, ZoneCatalog, classify_zone

DEFAULT_INTERVAL_MINUTES = 10
GM_MIN_HOURS_PER_DAY = 8.0


@dataclass
class PlayerProfile:
    player_id: str
    race: str
    player_class: str
    playtime_hours: float
    initial_level: int
    final_level: int
    evolution: int
    level_speed: float
    zones_visited: int
    tier_share: dict[str, float]
    category_share: dict[str, float]
    guild_count: int
    snapshots: int
    guild: str | None = None
    # set when the level sequence ever decreases over time
    level_anomaly: bool = False

    def share(self, *tiers: str) -> float:
        return sum(self.tier_share.get(t, 0.0) for t in tiers)


def level_speed(evolution: float, playtime_hours: float) -> float:
    """Levels gained per 1000 hours of play; 0 when nothing was played."""
    if evolution < 0 or playtime_hours < 0:
        raise ValueError("evolution and playtime must be non-negative")
    if playtime_hours == 0:
        return 0.0
    return evolution / playtime_hours * 1000.0


def _percentages(counts: Counter, keys: Sequence[str], total: int) -> dict[str, float]:
    if total == 0:
        return {k: 0.0 for k in keys}
    return {k: 100.0 * counts.get(k, 0) / total for k in keys}


def _profile(player_id: str, recs: list[SessionRecord], catalog: ZoneCatalog,
             interval_minutes: int) -> PlayerProfile:
    # stable sort: equal timestamps keep input order, so the first element is
    # the earliest-first-seen and the last is the latest-last-seen snapshot
    ordered = sorted(recs, key=lambda r: r.timestamp)
    first, last = ordered[0], ordered[-1]
    anomaly = any(b.level < a.level for a, b in zip(ordered, ordered[1:]))
    initial = first.level
    final = max(last.level, initial)
    evolution = final - initial
    n = len(ordered)
    hours = n * interval_minutes / 60.0

    zone_counts = Counter(r.zone for r in ordered)
    tier_counts: Counter = Counter()
    category_counts: Counter = Counter()
    for zone, count in zone_counts.items():
        info = classify_zone(catalog, zone)
        tier_counts[info.tier] += count
        category_counts[info.category] += count

    guilds = {r.guild for r in ordered if r.guild}
    return PlayerProfile(
        player_id=player_id,
        race=last.race,
        player_class=last.player_class,
        playtime_hours=hours,
        initial_level=initial,
        final_level=final,
        evolution=evolution,
        level_speed=level_speed(evolution, hours),
        zones_visited=len(zone_counts),
        tier_share=_percentages(tier_counts, TIERS, n),
        category_share=_percentages(category_counts, CATEGORIES, n),
        guild_count=len(guilds),
        snapshots=n,
        guild=last.guild,
        level_anomaly=anomaly or last.level < initial,
    )


def build_profiles(records: Iterable[SessionRecord], catalog: ZoneCatalog,
                   interval_minutes: int = DEFAULT_INTERVAL_MINUTES) -> list[PlayerProfile]:
    """One profile per player, sorted by player id."""
    if interval_minutes <= 0:
        raise ValueError("interval_minutes must be positive")
    by_player: dict[str, list[SessionRecord]] = {}
    for rec in records:
        by_player.setdefault(rec.player_id, []).append(rec)
    return [_profile(pid, by_player[pid], catalog, interval_minutes)
            for pid in sorted(by_player)]


def detect_gm(profile: PlayerProfile, window_days: int,
              min_hours_per_day: float = GM_MIN_HOURS_PER_DAY) -> bool:
    """Game-master signature: stuck at level 1 yet online most of every day."""
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    return (profile.evolution == 0 and profile.final_level == 1
            and profile.playtime_hours / window_days >= min_hours_per_day)


def window_days(records: Sequence[SessionRecord]) -> int:
    """Calendar days spanned by the records, counting both end days."""
    if not records:
        return 0
    lo = min(r.timestamp for r in records).date()
    hi = max(r.timestamp for r in records).date()
    return (hi - lo).days + 1


PROFILE_COLUMNS = (
    "player_id", "race", "class", "guild", "guild_count", "snapshots", "playtime_hours",
    "initial_level", "final_level", "evolution", "level_speed", "zones_visited",
    *(f"tier_{t}" for t in TIERS), *(f"category_{c}" for c in CATEGORIES), "level_anomaly",
)


def _fmt(x: float) -> str:
    # repr keeps full precision and is stable across runs
    return repr(float(x))


def profile_row(p: PlayerProfile) -> list[str]:
    return [
        p.player_id, p.race, p.player_class, p.guild or "", str(p.guild_count), str(p.snapshots),
        _fmt(p.playtime_hours), str(p.initial_level), str(p.final_level), str(p.evolution),
        _fmt(p.level_speed), str(p.zones_visited),
        *(_fmt(p.tier_share[t]) for t in TIERS),
        *(_fmt(p.category_share[c]) for c in CATEGORIES),
        "1" if p.level_anomaly else "0",
    ]


def write_profiles(profiles: Iterable[PlayerProfile], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS)
    for p in profiles:
        writer.writerow(profile_row(p))


def read_profiles(stream: TextIO) -> list[PlayerProfile]:
    reader = csv.DictReader(stream)
    missing = set(PROFILE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"profile file lacks columns: {sorted(missing)}")
    out = []
    for row in reader:
        out.append(PlayerProfile(
            player_id=row["player_id"],
            race=row["race"],
            player_class=row["class"],
            playtime_hours=float(row["playtime_hours"]),
            initial_level=int(row["initial_level"]),
            final_level=int(row["final_level"]),
            evolution=int(row["evolution"]),
            level_speed=float(row["level_speed"]),
            zones_visited=int(row["zones_visited"]),
            tier_share={t: float(row[f"tier_{t}"]) for t in TIERS},
            category_share={c: float(row[f"category_{c}"]) for c in CATEGORIES},
            guild_count=int(row["guild_count"]),
            snapshots=int(row["snapshots"]),
            guild=row["guild"] or None,
            level_anomaly=row["level_anomaly"] == "1",
        ))
    return out


def shares_consistent(p: PlayerProfile, tol: float = 1e-6) -> bool:
    if p.snapshots == 0:
        return True
    return (math.isclose(sum(p.tier_share.values()), 100.0, abs_tol=tol)
            and math.isclose(sum(p.category_share.values()), 100.0, abs_tol=tol))
