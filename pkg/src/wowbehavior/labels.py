"""Rule-based seed labels for the four Bartle behaviors."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence, TextIO

from .ingest import read_key_values
from .profiles import PlayerProfile

UNLABELED = "UNLABELED"


class BehaviorLabel(enum.Enum):
    # definition order is the canonical class order (tie-breaks, report rows)
    KILLER = "Killer"
    SOCIALIZER = "Socializer"
    ACHIEVER = "Achiever"
    EXPLORER = "Explorer"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "BehaviorLabel":
        return cls(text.strip().capitalize())


LABELS: tuple[BehaviorLabel, ...] = tuple(BehaviorLabel)


@dataclass(frozen=True)
class SeedThresholds:
    killer_min_level: int = 60
    killer_min_share: float = 70.0
    killer_max_zones: int = 10
    killer_max_speed: float = 25.0
    socializer_max_level: int = 30
    socializer_min_share: float = 30.0
    socializer_max_speed: float = 15.0
    achiever_min_hours: float = 1800.0
    achiever_max_zones: int = 25
    achiever_min_speed: float = 25.0
    explorer_min_hours: float = 1800.0
    explorer_min_zones: int = 30
    explorer_max_speed: float = 25.0

    @classmethod
    def read(cls, stream: TextIO) -> "SeedThresholds":
        return cls.from_mapping(read_key_values(stream))

    @classmethod
    def from_mapping(cls, values: Mapping[str, str | float]) -> "SeedThresholds":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown threshold {key!r}")
            kwargs[key] = int(raw) if types[key] == "int" else float(raw)
        return cls(**kwargs)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_THRESHOLDS = SeedThresholds()


def rule_matches(p: PlayerProfile, t: SeedThresholds = DEFAULT_THRESHOLDS) -> list[BehaviorLabel]:
    """Every behavior whose rule the profile satisfies, in canonical order."""
    speed = p.level_speed
    out = []
    if (p.final_level >= t.killer_min_level
            and p.tier_share["high"] + p.tier_share["medium"] + p.tier_share["neutral"] > t.killer_min_share
            and p.zones_visited < t.killer_max_zones
            and speed <= t.killer_max_speed):
        out.append(BehaviorLabel.KILLER)
    if (p.final_level <= t.socializer_max_level
            and p.tier_share["novice"] + p.tier_share["neutral"] > t.socializer_min_share
            and speed < t.socializer_max_speed):
        out.append(BehaviorLabel.SOCIALIZER)
    if (p.playtime_hours >= t.achiever_min_hours
            and p.zones_visited < t.achiever_max_zones
            and speed >= t.achiever_min_speed):
        out.append(BehaviorLabel.ACHIEVER)
    if (p.playtime_hours >= t.explorer_min_hours
            and p.zones_visited >= t.explorer_min_zones
            and speed < t.explorer_max_speed):
        out.append(BehaviorLabel.EXPLORER)
    return out


def seed_label(p: PlayerProfile, t: SeedThresholds = DEFAULT_THRESHOLDS) -> BehaviorLabel | None:
    """The single matching behavior, or None when zero or several rules fire."""
    matches = rule_matches(p, t)
    return matches[0] if len(matches) == 1 else None


@dataclass
class SeedLabeling:
    assignments: dict[str, BehaviorLabel | None]
    conflicts: int
    conflicted: frozenset[str] = frozenset()

    @property
    def labeled(self) -> int:
        return sum(1 for v in self.assignments.values() if v is not None)

    @property
    def coverage(self) -> float:
        return self.labeled / len(self.assignments) if self.assignments else 0.0

    def counts(self) -> dict[str, int]:
        out = {str(lab): 0 for lab in LABELS}
        out[UNLABELED] = 0
        for v in self.assignments.values():
            out[UNLABELED if v is None else str(v)] += 1
        return out


def seed_dataset(profiles: Iterable[PlayerProfile],
                 t: SeedThresholds = DEFAULT_THRESHOLDS) -> SeedLabeling:
    assignments: dict[str, BehaviorLabel | None] = {}
    conflicted = set()
    for p in profiles:
        matches = rule_matches(p, t)
        assignments[p.player_id] = matches[0] if len(matches) == 1 else None
        if len(matches) > 1:
            conflicted.add(p.player_id)
    return SeedLabeling(assignments, len(conflicted), frozenset(conflicted))


def write_labels(labels: Mapping[str, BehaviorLabel | None], stream: TextIO,
                 extra: Mapping[str, Sequence[str]] | None = None,
                 extra_header: Sequence[str] = ()) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["player_id", "label", *extra_header])
    for pid in sorted(labels):
        lab = labels[pid]
        row = [pid, UNLABELED if lab is None else str(lab)]
        if extra is not None:
            row.extend(extra.get(pid, ()))
        writer.writerow(row)


def read_labels(stream: TextIO) -> dict[str, BehaviorLabel | None]:
    out: dict[str, BehaviorLabel | None] = {}
    for row in csv.DictReader(stream):
        text = row["label"]
        out[row["player_id"]] = None if text == UNLABELED else BehaviorLabel.parse(text)
    return out
