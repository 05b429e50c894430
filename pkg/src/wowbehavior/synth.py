"""Synthetic session logs with known behavior archetypes.

Each player is planned at the profile level (playtime, level trajectory,
zone mix) so that the rule labeler recognises the intended archetype, then
expanded into snapshot records. "Margin" players are built to miss exactly
one clause of their own rule, so they stay unlabeled by the rules while
remaining close to their archetype for the learner.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping, TextIO

import numpy as np

from .ingest import SessionRecord
from .labels import DEFAULT_THRESHOLDS, BehaviorLabel, rule_matches
from .profiles import build_profiles, detect_gm
from .zones import ZoneCatalog, default_catalog

KILLER, SOCIALIZER, ACHIEVER, EXPLORER = (lab.value for lab in BehaviorLabel)
GM, NOISE = "GM", "Noise"
ARCHETYPES = (KILLER, SOCIALIZER, ACHIEVER, EXPLORER, GM, NOISE)

# Horde races and the classes each may roll (Death Knights left out: they
# start at level 55, which clashes with the low-level archetypes).
RACE_WEIGHTS = {"Orc": 0.30, "Undead": 0.28, "Blood Elf": 0.16, "Tauren": 0.17, "Troll": 0.09}
RACE_CLASSES = {
    "Orc": ("Hunter", "Rogue", "Shaman", "Warlock", "Warrior"),
    "Undead": ("Mage", "Priest", "Rogue", "Warlock", "Warrior"),
    "Blood Elf": ("Hunter", "Mage", "Paladin", "Priest", "Rogue", "Warlock"),
    "Tauren": ("Druid", "Hunter", "Shaman", "Warrior"),
    "Troll": ("Hunter", "Mage", "Priest", "Rogue", "Shaman", "Warrior"),
}
CLASS_WEIGHTS = {"Hunter": 0.20, "Mage": 0.15, "Warrior": 0.15, "Rogue": 0.10, "Warlock": 0.10,
                 "Priest": 0.08, "Shaman": 0.08, "Paladin": 0.08, "Druid": 0.06}

# Killer plurality, as in the real population.
DEFAULT_MIX = {KILLER: 0.40, SOCIALIZER: 0.17, ACHIEVER: 0.18, EXPLORER: 0.20,
                  GM: 0.01, NOISE: 0.04}

MAX_ATTEMPTS = 200


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ArchetypeRanges:
    """Sampling ranges per archetype (hours, levels, zone counts, shares)."""

    killer_hours: tuple[float, float] = (150.0, 1300.0)
    killer_final_level: tuple[int, int] = (60, 80)
    killer_speed: tuple[float, float] = (0.0, 20.0)
    killer_zones: tuple[int, int] = (3, 9)
    killer_share: tuple[float, float] = (0.80, 1.0)
    killer_margin_share: tuple[float, float] = (0.55, 0.70)

    socializer_hours: tuple[float, float] = (100.0, 1200.0)
    socializer_final_level: tuple[int, int] = (5, 30)
    socializer_speed: tuple[float, float] = (0.0, 12.0)
    socializer_zones: tuple[int, int] = (3, 15)
    socializer_share: tuple[float, float] = (0.45, 0.90)
    socializer_margin_share: tuple[float, float] = (0.15, 0.30)

    achiever_hours: tuple[float, float] = (1800.0, 2600.0)
    achiever_speed: tuple[float, float] = (28.0, 40.0)
    achiever_zones: tuple[int, int] = (12, 22)
    achiever_margin_zones: tuple[int, int] = (25, 29)

    explorer_hours: tuple[float, float] = (1800.0, 2600.0)
    explorer_margin_hours: tuple[float, float] = (1650.0, 1790.0)
    explorer_final_level: tuple[int, int] = (35, 80)
    explorer_speed: tuple[float, float] = (0.0, 10.0)
    explorer_zones: tuple[int, int] = (38, 55)

    noise_hours: tuple[float, float] = (200.0, 1300.0)
    noise_final_level: tuple[int, int] = (35, 55)
    noise_zones: tuple[int, int] = (10, 24)

    gm_hours_per_day: tuple[float, float] = (10.0, 18.0)
    gm_zones: tuple[int, int] = (1, 3)


@dataclass(frozen=True)
class PopulationSpec:
    counts: Mapping[str, int]
    start: datetime = datetime(2006, 1, 1)
    end: datetime = datetime(2008, 12, 31, 23, 50)
    interval_minutes: int = 10
    rng_seed: int = 0
    margin_fraction: float = 0.0
    ranges: ArchetypeRanges = field(default_factory=ArchetypeRanges)

    def __post_init__(self) -> None:
        unknown = set(self.counts) - set(ARCHETYPES)
        if unknown:
            raise SpecError(f"unknown archetypes: {sorted(unknown)}")
        if any(v < 0 for v in self.counts.values()):
            raise SpecError("archetype counts must be non-negative")
        if sum(self.counts.values()) <= 0:
            raise SpecError("population is empty")
        if self.interval_minutes <= 0:
            raise SpecError("interval_minutes must be positive")
        if self.end <= self.start:
            raise SpecError("window end must follow its start")
        if not 0.0 <= self.margin_fraction <= 1.0:
            raise SpecError("margin_fraction must be in [0, 1]")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def slots(self) -> int:
        return int((self.end - self.start) / timedelta(minutes=self.interval_minutes)) + 1

    @property
    def window_days(self) -> int:
        return (self.end.date() - self.start.date()).days + 1


def mixed_population_spec(n_players: int, rng_seed: int = 0, margin_fraction: float = 0.7,
                    interval_minutes: int = 10, **kwargs) -> PopulationSpec:
    counts = {a: int(round(share * n_players)) for a, share in DEFAULT_MIX.items()}
    counts[KILLER] += n_players - sum(counts.values())
    return PopulationSpec(counts, interval_minutes=interval_minutes, rng_seed=rng_seed,
                          margin_fraction=margin_fraction, **kwargs)


@dataclass
class GroundTruth:
    archetypes: dict[str, str]
    margin: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.archetypes)

    def write(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["player_id", "archetype", "margin"])
        for pid in sorted(self.archetypes):
            writer.writerow([pid, self.archetypes[pid], "1" if pid in self.margin else "0"])

    @classmethod
    def read(cls, stream: TextIO) -> "GroundTruth":
        arch, margin = {}, set()
        for row in csv.DictReader(stream):
            arch[row["player_id"]] = row["archetype"]
            if row.get("margin") == "1":
                margin.add(row["player_id"])
        return cls(arch, frozenset(margin))


@dataclass
class _Plan:
    hours: float
    initial: int
    final: int
    zone_counts: dict[str, int]


class _Generator:
    def __init__(self, spec: PopulationSpec, catalog: ZoneCatalog) -> None:
        self.spec = spec
        self.r = spec.ranges
        self.catalog = catalog
        self.rule_killer = catalog.names_in(("high", "medium", "neutral"))
        self.other_killer = catalog.names_in(("low", "novice"))
        self.rule_social = catalog.names_in(("novice", "neutral"))
        self.other_social = catalog.names_in(("low", "medium"))
        self.all_zones = catalog.names_in()
        self.gm_zones = catalog.names_in(("neutral",), ("city",))
        self._check_feasible()
        self.slot_times = [spec.start + timedelta(minutes=spec.interval_minutes * i)
                           for i in range(spec.slots)]
        self.races = list(RACE_WEIGHTS)
        w = np.array([RACE_WEIGHTS[r] for r in self.races])
        self.race_p = w / w.sum()

    def _check_feasible(self) -> None:
        c, r = self.spec.counts, self.r
        needs = []
        if c.get(KILLER):
            needs += [("killer rule-tier zones", self.rule_killer, r.killer_zones[1]),
                      ("low/novice zones", self.other_killer, 1)]
        if c.get(SOCIALIZER):
            needs += [("novice/neutral zones", self.rule_social, r.socializer_zones[1]),
                      ("low/medium zones", self.other_social, 1)]
        if c.get(ACHIEVER):
            needs.append(("zones", self.all_zones, r.achiever_margin_zones[1]))
        if c.get(EXPLORER):
            needs.append(("zones", self.all_zones, r.explorer_zones[1]))
        if c.get(NOISE):
            needs.append(("zones", self.all_zones, r.noise_zones[1]))
        if c.get(GM):
            needs.append(("city zones", self.gm_zones, r.gm_zones[1]))
        for what, zones, k in needs:
            if len(zones) < k:
                raise SpecError(f"catalog has {len(zones)} {what}, archetypes need {k}")
        hours_cap = self.spec.slots * self.spec.interval_minutes / 60.0
        longest = max(r.achiever_hours[1], r.explorer_hours[1])
        if (c.get(ACHIEVER) or c.get(EXPLORER)) and hours_cap < longest:
            raise SpecError("window too short for the playtime of achievers/explorers")
        if c.get(GM) and hours_cap < r.gm_hours_per_day[1] * self.spec.window_days:
            raise SpecError("interval too coarse for game-master presence")

    # -- helpers -----------------------------------------------------------

    def _snapshots(self, hours: float) -> int:
        return max(1, math.ceil(hours * 60.0 / self.spec.interval_minutes - 1e-9))

    def _hours(self, n: int) -> float:
        return n * self.spec.interval_minutes / 60.0

    @staticmethod
    def _spread(rng, zones: list[str], total: int) -> dict[str, int]:
        """Split ``total`` snapshots over ``zones`` with at least one each."""
        if not zones:
            return {}
        weights = rng.dirichlet(np.ones(len(zones)))
        extra = rng.multinomial(total - len(zones), weights)
        return {z: 1 + int(e) for z, e in zip(zones, extra)}

    def _two_group_mix(self, rng, n: int, n_zones: int, share: float,
                       rule_pool: list[str], other_pool: list[str]) -> dict[str, int]:
        """Zone counts with about ``share`` of ``n`` snapshots in the rule tiers."""
        if share >= 1.0:
            zones = list(rng.choice(rule_pool, n_zones, replace=False))
            return self._spread(rng, zones, n)
        k_other = 1 if n_zones <= 4 else int(rng.integers(1, min(3, n_zones - 1) + 1))
        k_rule = n_zones - k_other
        rule_n = min(max(int(round(share * n)), k_rule), n - k_other)
        counts = self._spread(rng, list(rng.choice(rule_pool, k_rule, replace=False)), rule_n)
        counts.update(self._spread(rng, list(rng.choice(other_pool, k_other, replace=False)),
                                   n - rule_n))
        return counts

    def _any_mix(self, rng, n: int, n_zones: int) -> dict[str, int]:
        return self._spread(rng, list(rng.choice(self.all_zones, n_zones, replace=False)), n)

    # -- archetype plans ---------------------------------------------------

    def _plan(self, arch: str, margin: bool, rng) -> _Plan:
        r = self.r
        u = rng.uniform
        if arch == KILLER:
            n = self._snapshots(u(*r.killer_hours))
            hours = self._hours(n)
            final = int(rng.integers(r.killer_final_level[0], r.killer_final_level[1] + 1))
            evo = min(final - 1, int(u(*r.killer_speed) * hours / 1000.0))
            n_zones = int(rng.integers(r.killer_zones[0], r.killer_zones[1] + 1))
            if margin:
                share = u(*r.killer_margin_share)
            else:
                share = 1.0 if rng.random() < 0.4 else u(*r.killer_share)
            zones = self._two_group_mix(rng, n, n_zones, share, self.rule_killer,
                                        self.other_killer)
            return _Plan(hours, final - evo, final, zones)
        if arch == SOCIALIZER:
            n = self._snapshots(u(*r.socializer_hours))
            hours = self._hours(n)
            final = int(rng.integers(r.socializer_final_level[0], r.socializer_final_level[1] + 1))
            evo = min(final - 1, int(u(*r.socializer_speed) * hours / 1000.0))
            n_zones = int(rng.integers(r.socializer_zones[0], r.socializer_zones[1] + 1))
            share = u(*(r.socializer_margin_share if margin else r.socializer_share))
            zones = self._two_group_mix(rng, n, n_zones, share, self.rule_social,
                                        self.other_social)
            return _Plan(hours, final - evo, final, zones)
        if arch == ACHIEVER:
            n = self._snapshots(u(*r.achiever_hours))
            hours = self._hours(n)
            evo = min(79, math.ceil(u(*r.achiever_speed) * hours / 1000.0))
            initial = int(rng.integers(1, 80 - evo + 1))
            lo, hi = r.achiever_margin_zones if margin else r.achiever_zones
            zones = self._any_mix(rng, n, int(rng.integers(lo, hi + 1)))
            return _Plan(hours, initial, initial + evo, zones)
        if arch == EXPLORER:
            n = self._snapshots(u(*(r.explorer_margin_hours if margin else r.explorer_hours)))
            hours = self._hours(n)
            final = int(rng.integers(r.explorer_final_level[0], r.explorer_final_level[1] + 1))
            evo = min(final - 1, int(u(*r.explorer_speed) * hours / 1000.0))
            zones = self._any_mix(rng, n, int(rng.integers(r.explorer_zones[0],
                                                           r.explorer_zones[1] + 1)))
            return _Plan(hours, final - evo, final, zones)
        if arch == NOISE:
            n = self._snapshots(u(*r.noise_hours))
            final = int(rng.integers(r.noise_final_level[0], r.noise_final_level[1] + 1))
            evo = int(rng.integers(1, 30))
            zones = self._any_mix(rng, n, int(rng.integers(r.noise_zones[0], r.noise_zones[1] + 1)))
            return _Plan(self._hours(n), final - evo, final, zones)
        if arch == GM:
            per_day = u(*r.gm_hours_per_day)
            n = min(self.spec.slots, self._snapshots(per_day * self.spec.window_days))
            k = int(rng.integers(r.gm_zones[0], r.gm_zones[1] + 1))
            zones = self._spread(rng, list(rng.choice(self.gm_zones, k, replace=False)), n)
            return _Plan(self._hours(n), 1, 1, zones)
        raise SpecError(f"unknown archetype {arch!r}")

    # -- expansion ---------------------------------------------------------

    def _identity(self, rng) -> tuple[str, str]:
        race = self.races[int(rng.choice(len(self.races), p=self.race_p))]
        classes = RACE_CLASSES[race]
        w = np.array([CLASS_WEIGHTS[c] for c in classes])
        return race, classes[int(rng.choice(len(classes), p=w / w.sum()))]

    def _records(self, pid: str, plan: _Plan, arch: str, rng) -> list[SessionRecord]:
        n = sum(plan.zone_counts.values())
        slots = np.sort(rng.choice(self.spec.slots, size=n, replace=False))
        levels = np.sort(rng.integers(plan.initial, plan.final + 1, size=n))
        levels[0], levels[-1] = plan.initial, plan.final
        names = sorted(plan.zone_counts)
        zone_seq = rng.permutation(np.repeat(np.arange(len(names)),
                                             [plan.zone_counts[z] for z in names]))
        guilds: list[str | None] = [None] * n
        n_guilds = 0 if arch == GM else int(rng.integers(0, 4))
        if n_guilds:
            pool = rng.choice(300, size=n_guilds, replace=False)
            cuts = np.sort(rng.choice(np.arange(1, n), size=min(n_guilds - 1, n - 1),
                                      replace=False)) if n > 1 else np.array([], dtype=int)
            bounds = [0, *cuts.tolist(), n]
            for g, (a, b) in zip(pool, zip(bounds, bounds[1:])):
                for i in range(a, b):
                    guilds[i] = f"Guild {int(g):03d}"
        race, cls = self._identity(rng)
        times = self.slot_times
        return [SessionRecord(times[s], pid, g, int(lv), race, cls, names[z])
                for s, lv, z, g in zip(slots.tolist(), levels.tolist(), zone_seq.tolist(), guilds)]

    def _accept(self, arch: str, margin: bool, recs: list[SessionRecord]) -> bool:
        prof = build_profiles(recs, self.catalog, self.spec.interval_minutes)[0]
        matches = rule_matches(prof, DEFAULT_THRESHOLDS)
        if arch == GM:
            return detect_gm(prof, self.spec.window_days)
        if arch == NOISE or margin:
            return not matches and prof.final_level > 1
        return [m.value for m in matches] == [arch]

    def player(self, index: int, pid: str, arch: str, margin: bool) -> list[SessionRecord]:
        rng = np.random.default_rng([self.spec.rng_seed, index])
        for _ in range(MAX_ATTEMPTS):
            recs = self._records(pid, self._plan(arch, margin, rng), arch, rng)
            if self._accept(arch, margin, recs):
                return recs
        raise SpecError(f"could not realise a {'margin ' if margin else ''}{arch} player; "
                        "ranges conflict with the rule thresholds")


def generate_population(spec: PopulationSpec, catalog: ZoneCatalog | None = None
                        ) -> tuple[list[SessionRecord], GroundTruth]:
    """Records ordered by player then time, and each player's archetype."""
    catalog = catalog or default_catalog()
    gen = _Generator(spec, catalog)
    rng = np.random.default_rng(spec.rng_seed)
    archetypes: list[str] = []
    margins: list[bool] = []
    for arch in ARCHETYPES:
        count = int(spec.counts.get(arch, 0))
        n_margin = 0 if arch in (GM, NOISE) else int(round(spec.margin_fraction * count))
        archetypes += [arch] * count
        margins += [True] * n_margin + [False] * (count - n_margin)
    order = rng.permutation(len(archetypes))
    width = max(6, len(str(len(archetypes))))
    records: list[SessionRecord] = []
    truth: dict[str, str] = {}
    margin_ids: set[str] = set()
    for i, j in enumerate(order.tolist()):
        pid = f"P{i + 1:0{width}d}"
        truth[pid] = archetypes[j]
        if margins[j]:
            margin_ids.add(pid)
        records.extend(gen.player(i, pid, archetypes[j], margins[j]))
    return records, GroundTruth(truth, frozenset(margin_ids))
