from __future__ import annotations

import io
import random
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wowbehavior.ingest import (
    ColumnMap, IngestStats, SessionRecord, filter_window, parse_session_log,
    write_session_log, year_window,
)

LINE = "2006-01-03 12:10, P0001, Bloodfang, 14, Orc, Hunter, Durotar"


def parse(text, **kw):
    return parse_session_log(io.StringIO(text), **kw)


def test_identity_mapping_reads_every_field():
    (rec,), stats = parse(LINE + "\n")
    assert rec == SessionRecord(datetime(2006, 1, 3, 12, 10), "P0001", "Bloodfang", 14,
                                "Orc", "Hunter", "Durotar")
    assert stats.rows_accepted == 1 and stats.rows_rejected == 0


def test_non_numeric_level_is_rejected():
    recs, stats = parse(LINE.replace(", 14,", ", abc,") + "\n")
    assert recs == []
    assert stats.rows_rejected == 1
    assert stats.rejected_by_reason["bad_level"] == 1
    assert stats.rejected_lines == [(1, "bad_level")]


def test_twelve_column_row_with_dummies_matches_canonical():
    cells = [c.strip() for c in LINE.split(",")]
    # canonical fields scattered over columns 0..8, dummies at 9..11
    layout = {"zone": 0, "timestamp": 1, "level": 2, "player_id": 3, "race": 4,
              "guild": 5, "class": 6}
    canonical = dict(zip(["timestamp", "player_id", "guild", "level", "race", "class", "zone"], cells))
    row = ["pad"] * 12
    for name, idx in layout.items():
        row[idx] = canonical[name]
    row[7], row[8] = "x7", "x8"
    cmap = ColumnMap.read(io.StringIO("\n".join(f"{k} = {v}" for k, v in layout.items())
                                      + "\ncolumns = 12\n"))
    (wide,), _ = parse(",".join(row) + "\n", column_map=cmap)
    (narrow,), _ = parse(LINE + "\n")
    assert wide == narrow
    assert wide.to_row() == narrow.to_row() == [
        "2006-01-03 12:10", "P0001", "Bloodfang", "14", "Orc", "Hunter", "Durotar"]


def test_pinned_column_count_rejects_short_rows():
    _, stats = parse(LINE + "\n", column_map=ColumnMap(n_columns=8))
    assert stats.rejected_by_reason == {"bad_column_count": 1}


@pytest.mark.parametrize("line,reason", [
    ("2006-13-03 12:10,P1,G,14,Orc,Hunter,Durotar", "bad_timestamp"),
    ("yesterday,P1,G,14,Orc,Hunter,Durotar", "bad_timestamp"),
    ("2006-01-03 12:10,P1,G,0,Orc,Hunter,Durotar", "level_out_of_range"),
    ("2006-01-03 12:10,P1,G,81,Orc,Hunter,Durotar", "level_out_of_range"),
    ("2006-01-03 12:10, ,G,14,Orc,Hunter,Durotar", "empty_player_id"),
    ("2006-01-03 12:10,P1,G,14,Orc,Hunter, ", "empty_zone"),
    ("2006-01-03 12:10,P1,G,14,Orc,Hunter", "bad_column_count"),
])
def test_rejection_reasons(line, reason):
    recs, stats = parse(line + "\n")
    assert recs == [] and dict(stats.rejected_by_reason) == {reason: 1}


def test_guild_placeholders_mean_no_guild():
    recs, _ = parse("2006-01-03 12:10,P1,-,14,Orc,Hunter,Durotar\n"
                    "2006-01-03 12:20,P1,,14,Orc,Hunter,Durotar\n")
    assert [r.guild for r in recs] == [None, None]


def test_header_tabs_and_line_numbers():
    text = "time\tid\tguild\tlevel\trace\tclass\tzone\n" \
           "2006-01-03 12:10\tP1\tG\t14\tOrc\tHunter\tDurotar\n" \
           "\n" \
           "2006-01-03 12:20\tP1\tG\tbad\tOrc\tHunter\tDurotar\n"
    recs, stats = parse(text, delimiter="\t", has_header=True)
    assert len(recs) == 1
    assert stats.rows_read == 2
    assert stats.rejected_lines == [(4, "bad_level")]


def test_custom_time_format():
    recs, _ = parse("03/01/2006 12:10,P1,G,14,Orc,Hunter,Durotar\n", time_format="%d/%m/%Y %H:%M")
    assert recs[0].timestamp == datetime(2006, 1, 3, 12, 10)


def test_stats_summary_and_merge():
    a = parse("2006-01-03 12:10,P1,G,14,Orc,Hunter,Durotar\n")[1]
    b = parse("2007-05-03 12:10,P2,G,14,Orc,Hunter,Durotar\nbad\n")[1]
    m = a.merge(b)
    assert (m.rows_read, m.rows_accepted, m.rows_rejected) == (3, 2, 1)
    assert m.date_range == (datetime(2006, 1, 3, 12, 10), datetime(2007, 5, 3, 12, 10))
    d = IngestStats().as_dict()
    assert d["date_range"] is None and d["rows_read"] == 0


def test_write_then_parse_round_trip():
    recs, _ = parse(LINE + "\n2006-01-03 12:20,P0002,,70,Undead,Mage,Orgrimmar\n")
    buf = io.StringIO()
    assert write_session_log(recs, buf) == 2
    again, _ = parse(buf.getvalue())
    assert again == recs


def test_parsing_is_deterministic():
    text = LINE + "\n" + LINE.replace("P0001", "P0002") + "\n"
    assert parse(text) == parse(text)


def _dated(ts, pid="P"):
    return SessionRecord(ts, pid, None, 10, "Orc", "Hunter", "Durotar")


def test_year_window_keeps_only_that_year():
    recs = [_dated(datetime(y, 6, 1)) for y in (2006, 2007, 2008)]
    assert filter_window(recs, year_window(2007)) == [recs[1]]


def test_full_range_window_is_identity():
    recs = [_dated(datetime(2006, 1, 1) + timedelta(days=37 * i)) for i in range(20)]
    assert filter_window(recs, (recs[0].timestamp, recs[-1].timestamp)) == recs


def test_inverted_window_is_an_error():
    with pytest.raises(ValueError):
        filter_window([], (datetime(2008, 1, 1), datetime(2007, 1, 1)))


def test_year_window_count_matches_recount():
    rng = random.Random(7)
    lo = datetime(2006, 1, 1)
    span = int((datetime(2009, 12, 31, 23, 59) - lo).total_seconds() // 60)
    recs = [_dated(lo + timedelta(minutes=rng.randrange(span + 1))) for _ in range(1000)]
    # a few records pinned on the boundaries
    recs += [_dated(datetime(2008, 1, 1, 0, 0)), _dated(datetime(2008, 12, 31, 23, 59)),
             _dated(datetime(2007, 12, 31, 23, 59)), _dated(datetime(2009, 1, 1, 0, 0))]
    expected = sum(1 for r in recs if r.timestamp.year == 2008)
    assert len(filter_window(recs, year_window(2008))) == expected


timestamps = st.datetimes(min_value=datetime(2005, 1, 1), max_value=datetime(2010, 1, 1)).map(
    lambda d: d.replace(second=0, microsecond=0))


@given(st.lists(timestamps, max_size=40), timestamps, timestamps, timestamps, timestamps)
def test_nested_windows_intersect(ts, a, b, c, d):
    recs = [_dated(t, f"P{i}") for i, t in enumerate(ts)]
    w1, w2 = tuple(sorted((a, b))), tuple(sorted((c, d)))
    twice = filter_window(filter_window(recs, w1), w2)
    lo, hi = max(w1[0], w2[0]), min(w1[1], w2[1])
    once = filter_window(recs, (lo, hi)) if lo <= hi else []
    assert twice == once


cell = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
               max_size=12)


@settings(max_examples=300)
@given(st.lists(st.lists(cell, max_size=9), max_size=15))
def test_fuzzed_input_is_accounted_for(rows):
    text = "\n".join(",".join(c.replace(",", "").replace("\n", "").replace("\r", "")
                              .replace('"', "") for c in r) for r in rows)
    recs, stats = parse(text)
    assert stats.rows_read == stats.rows_accepted + stats.rows_rejected
    assert stats.rows_accepted == len(recs)
    assert sum(stats.rejected_by_reason.values()) == stats.rows_rejected
    for r in recs:
        assert 1 <= r.level <= 80 and r.player_id and r.zone
