from __future__ import annotations

import io
from datetime import datetime, timedelta

import pytest

from wowbehavior.ingest import SessionRecord
from wowbehavior.profiles import PlayerProfile, level_speed
from wowbehavior.zones import CATEGORIES, TIERS, load_zone_catalog

TINY_CATALOG = """\
# name, category, tier
Orgrimmar, city, neutral
Eye of the Storm, pvp, neutral
Durotar, field, novice
The Barrens, field, low
Stranglethorn Vale, field, medium
Nagrand, field, high
"""


@pytest.fixture
def tiny_catalog():
    return load_zone_catalog(io.StringIO(TINY_CATALOG))


def make_profile(player_id: str = "P1", *, final_level: int = 50, initial_level: int | None = None,
                 playtime_hours: float = 100.0, zones_visited: int = 5,
                 level_speed_value: float | None = None, race: str = "Orc",
                 player_class: str = "Hunter", **shares: float) -> PlayerProfile:
    """Profile with explicit rule inputs; unspecified tier shares are 0."""
    initial = final_level if initial_level is None else initial_level
    evo = final_level - initial
    speed = level_speed(evo, playtime_hours) if level_speed_value is None else level_speed_value
    tier_share = {t: float(shares.get(t, 0.0)) for t in TIERS}
    return PlayerProfile(
        player_id=player_id, race=race, player_class=player_class,
        playtime_hours=playtime_hours, initial_level=initial, final_level=final_level,
        evolution=evo, level_speed=speed, zones_visited=zones_visited,
        tier_share=tier_share, category_share={c: 0.0 for c in CATEGORIES},
        guild_count=0, snapshots=max(1, int(playtime_hours * 6)),
    )


def snapshots(pid: str, levels, zones, start=datetime(2006, 1, 1), interval=10,
              race="Orc", cls="Hunter", guild=None) -> list[SessionRecord]:
    return [SessionRecord(start + timedelta(minutes=interval * i), pid, guild, lv, race, cls, z)
            for i, (lv, z) in enumerate(zip(levels, zones))]


@pytest.fixture(scope="session")
def two_year_log(tmp_path_factory):
    """A small killer-plurality population over 2007-2008, written as a snapshot log."""
    from wowbehavior.ingest import write_session_log
    from wowbehavior.synth import mixed_population_spec, generate_population

    spec = mixed_population_spec(400, rng_seed=42, interval_minutes=240,
                           start=datetime(2007, 1, 1), end=datetime(2008, 12, 31, 20, 0))
    records, truth = generate_population(spec)
    path = tmp_path_factory.mktemp("synth") / "sessions.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_session_log(records, fh)
    return path, truth


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
