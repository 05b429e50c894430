from __future__ import annotations

import io
from datetime import datetime

import pytest

from wowbehavior.labels import rule_matches, seed_dataset
from wowbehavior.profiles import build_profiles, detect_gm
from wowbehavior.synth import (
    GM, KILLER, NOISE, DEFAULT_MIX, GroundTruth, PopulationSpec, SpecError,
    generate_population, mixed_population_spec,
)
from wowbehavior.zones import default_catalog

CATALOG = default_catalog()


def profiles_of(spec):
    records, truth = generate_population(spec, CATALOG)
    return build_profiles(records, CATALOG, spec.interval_minutes), truth


def test_killer_only_population():
    profiles, _ = profiles_of(PopulationSpec({KILLER: 100}, interval_minutes=240, rng_seed=1))
    assert len(profiles) == 100
    assert all([str(m) for m in rule_matches(p)] == [KILLER] for p in profiles)


def test_noise_only_population_is_never_seeded():
    profiles, _ = profiles_of(PopulationSpec({NOISE: 50}, interval_minutes=240))
    assert seed_dataset(profiles).coverage == 0


def test_default_mix_coverage():
    spec = mixed_population_spec(1000, rng_seed=4, interval_minutes=240)
    profiles, truth = profiles_of(spec)
    cov = seed_dataset(profiles).coverage
    assert 0.25 <= cov <= 0.35
    assert max(DEFAULT_MIX, key=DEFAULT_MIX.get) == KILLER
    assert len(truth.margin) > 0
    for p in profiles:
        if p.player_id in truth.margin:
            assert rule_matches(p) == []


def test_gms_are_detectable():
    spec = PopulationSpec({GM: 5, KILLER: 5, NOISE: 5}, interval_minutes=60, rng_seed=2)
    profiles, truth = profiles_of(spec)
    flagged = {p.player_id for p in profiles if detect_gm(p, spec.window_days)}
    assert flagged == {pid for pid, a in truth.archetypes.items() if a == GM}


def test_generation_is_seeded():
    spec = mixed_population_spec(40, rng_seed=9, interval_minutes=240)
    a = generate_population(spec, CATALOG)
    assert a == generate_population(spec, CATALOG)
    other = mixed_population_spec(40, rng_seed=10, interval_minutes=240)
    assert a[0] != generate_population(other, CATALOG)[0]


def test_records_are_grouped_by_player_and_time():
    records, truth = generate_population(mixed_population_spec(30, interval_minutes=240), CATALOG)
    keys = [(r.player_id, r.timestamp) for r in records]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert {r.player_id for r in records} == set(truth.archetypes)


def test_ground_truth_round_trip():
    truth = GroundTruth({"P2": KILLER, "P1": GM}, frozenset({"P2"}))
    buf = io.StringIO()
    truth.write(buf)
    buf.seek(0)
    assert GroundTruth.read(buf) == truth


@pytest.mark.parametrize("kwargs", [
    {"counts": {"Bard": 3}},
    {"counts": {KILLER: -1}},
    {"counts": {KILLER: 0}},
    {"counts": {KILLER: 1}, "margin_fraction": 1.5},
    {"counts": {KILLER: 1}, "interval_minutes": 0},
    {"counts": {KILLER: 1}, "end": datetime(2005, 1, 1)},
])
def test_invalid_specs(kwargs):
    with pytest.raises(SpecError):
        PopulationSpec(**kwargs)


def test_infeasible_window():
    spec = PopulationSpec({"Explorer": 2}, start=datetime(2006, 1, 1), end=datetime(2006, 1, 20))
    with pytest.raises(SpecError):
        generate_population(spec, CATALOG)
