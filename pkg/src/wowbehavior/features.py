"""Profiles to learner-ready feature tables."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .labels import LABELS, BehaviorLabel
from .profiles import PlayerProfile
from .tree import NOMINAL, NUMERIC, Dataset, Feature

# Attributes the tree is allowed to use. Zone tier shares feed the seed
# rules only.
PROFILE_FEATURES: tuple[Feature, ...] = (
    Feature("class", NOMINAL),
    Feature("race", NOMINAL),
    Feature("initial_level", NUMERIC),
    Feature("final_level", NUMERIC),
    Feature("evolution", NUMERIC),
    Feature("zones_visited", NUMERIC),
    Feature("playtime_hours", NUMERIC),
    Feature("level_speed", NUMERIC),
)
FEATURE_NAMES = tuple(f.name for f in PROFILE_FEATURES)


def feature_vector(p: PlayerProfile) -> dict[str, object]:
    return {
        "class": p.player_class,
        "race": p.race,
        "initial_level": float(p.initial_level),
        "final_level": float(p.final_level),
        "evolution": float(p.evolution),
        "zones_visited": float(p.zones_visited),
        "playtime_hours": float(p.playtime_hours),
        "level_speed": float(p.level_speed),
    }


def profiles_dataset(profiles: Sequence[PlayerProfile],
                     labels: Mapping[str, BehaviorLabel] | Sequence[BehaviorLabel] | None = None,
                     features: Iterable[str] | None = None) -> Dataset:
    """Dataset over ``profiles``; labels may be a per-player mapping or a list."""
    cols = {
        "class": np.array([p.player_class for p in profiles], dtype=object),
        "race": np.array([p.race for p in profiles], dtype=object),
        "initial_level": np.array([p.initial_level for p in profiles], dtype=float),
        "final_level": np.array([p.final_level for p in profiles], dtype=float),
        "evolution": np.array([p.evolution for p in profiles], dtype=float),
        "zones_visited": np.array([p.zones_visited for p in profiles], dtype=float),
        "playtime_hours": np.array([p.playtime_hours for p in profiles], dtype=float),
        "level_speed": np.array([p.level_speed for p in profiles], dtype=float),
    }
    y = None
    if labels is not None:
        index = {lab: i for i, lab in enumerate(LABELS)}
        if isinstance(labels, Mapping):
            seq = [labels[p.player_id] for p in profiles]
        else:
            seq = list(labels)
        y = np.array([index[lab] for lab in seq], dtype=np.int64)
    data = Dataset(PROFILE_FEATURES, cols, y, LABELS, [p.player_id for p in profiles])
    return data if features is None else data.select_features(features)
