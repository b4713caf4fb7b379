import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spendseq import ingest
from spendseq.ingest import PurchaseEvent, collapse_daily, parse_receipt_log, select_frequent_pairs


def test_parse_single_line():
    events, rejected = parse_receipt_log(["u1,a9,InApp,37,499"])
    assert events == [PurchaseEvent("u1", "a9", "InApp", 37, 499)]
    assert rejected == []


def test_unknown_category_rejected():
    events, rejected = parse_receipt_log(["u1,a9,Snack,37,499"])
    assert events == []
    assert rejected[0].reason == "unknown-category"
    assert rejected[0].line_no == 1


def test_bad_line_does_not_abort():
    lines = ["user_id,app_id,category,day,amount_cents", "u1,a1,InApp,1,100", "u1,a1,InApp,x,100", "u2,a2,Song,3,129"]
    events, rejected = parse_receipt_log(lines)
    assert len(events) == 2 and len(rejected) == 1
    assert rejected[0].line_no == 3 and rejected[0].reason == "bad-day"


@pytest.mark.parametrize(
    "line, reason",
    [
        ("u1,a1,InApp,1", "field-count"),
        ("u1,a1,InApp,-1,5", "day-out-of-range"),
        ("u1,a1,InApp,1,-5", "negative-amount"),
        (",a1,InApp,1,5", "empty-id"),
        ("u1,a1,InApp,1,1.5", "bad-amount"),
    ],
)
def test_rejection_reasons(line, reason):
    _, rejected = parse_receipt_log([line])
    assert rejected[0].reason == reason


def test_span_days_bound():
    events, rejected = parse_receipt_log(["u1,a1,InApp,9,5", "u1,a1,InApp,10,5"], span_days=10)
    assert len(events) == 1 and rejected[0].reason == "day-out-of-range"


def test_read_missing_file_raises(tmp_path):
    with pytest.raises(OSError):
        ingest.read_receipt_log(tmp_path / "nope.csv")


def test_profiles_parse_and_missing_fields():
    text = ["user_id,age,gender,country,income_bracket", "u1,34,F,US,50000", "u2,,,,", "u1,20,M,GB,0", "u3,5,M,US,0"]
    profiles, rejected = ingest.parse_profiles(text)
    assert profiles["u1"].age == 34 and profiles["u1"].gender == "F"
    assert profiles["u2"].age is None and profiles["u2"].country is None
    assert [r.reason for r in rejected] == ["duplicate-user", "age-out-of-range"]


def test_profiles_round_trip():
    profiles, _ = ingest.parse_profiles(["u1,34,F,US,50000", "u2,,,,"])
    buf = io.StringIO()
    ingest.write_profiles(profiles, buf)
    again, rejected = ingest.parse_profiles(buf.getvalue().splitlines())
    assert again == profiles and not rejected


def test_same_day_merge():
    ev = [PurchaseEvent("u1", "a1", "InApp", 3, 200), PurchaseEvent("u1", "a1", "InApp", 3, 300)]
    assert collapse_daily(ev)["u1"].entries == [("a1", 3, 500)]


def test_collapse_empty():
    assert collapse_daily([]) == {}


def test_same_day_tie_break():
    ev = [PurchaseEvent("u1", "a2", "InApp", 5, 100), PurchaseEvent("u1", "a1", "InApp", 5, 100)]
    assert collapse_daily(ev)["u1"].entries == [("a1", 5, 100), ("a2", 5, 100)]


def test_category_filter_and_day_variant():
    ev = [
        PurchaseEvent("u1", "a1", "InApp", 5, 100),
        PurchaseEvent("u1", "a2", "InApp", 5, 50),
        PurchaseEvent("u1", "s1", "Song", 5, 129),
    ]
    assert collapse_daily(ev, "InApp")["u1"].apps == ["a1", "a2"]
    pooled = collapse_daily(ev, "InApp", merge="day")["u1"].entries
    assert pooled == [(ingest.POOLED_APP, 5, 150)]


def _pair(n, first_day, step=1):
    entries = [("a1", first_day + step * k, 100) for k in range(n)]
    return {"u1": ingest.DaySequence("u1", entries)}


def test_frequent_pair_51_kept():
    seqs = _pair(51, 40)
    assert len(select_frequent_pairs(seqs, 50, (0, 200), 30)) == 1


def test_frequent_pair_50_excluded():
    assert select_frequent_pairs(_pair(50, 40), 50, (0, 200), 30) == []


def test_frequent_pair_margin():
    assert select_frequent_pairs(_pair(60, 10), 50, (0, 200), 30) == []


def test_frequent_pair_inverted_window():
    with pytest.raises(ValueError):
        select_frequent_pairs(_pair(60, 40), 50, (200, 0), 30)


def test_split_day():
    assert ingest.split_day(0, 99, 0.8) == 80
    assert ingest.split_day(0, 99, 1.0) == 100
    with pytest.raises(ValueError):
        ingest.split_day(0, 99, 0.0)


# ---------------------------------------------------------------- properties

ids = st.sampled_from(["u1", "u2", "u3"])
apps = st.sampled_from(["a", "b", "c,d", 'q"x'])
events_st = st.lists(
    st.builds(
        PurchaseEvent,
        ids,
        apps,
        st.sampled_from(ingest.CATEGORIES),
        st.integers(0, 30),
        st.integers(0, 10_000),
    ),
    max_size=40,
)


@given(events_st)
def test_round_trip(events):
    text = ingest.format_receipt_log(events)
    parsed, rejected = parse_receipt_log(text.splitlines())
    assert parsed == events and rejected == []


@given(events_st)
def test_collapse_conserves_money(events):
    for cat in ingest.CATEGORIES:
        before = {}
        for e in events:
            if e.category == cat:
                before[e.user_id] = before.get(e.user_id, 0) + e.amount_cents
        after = {u: sum(s.amounts) for u, s in collapse_daily(events, cat).items()}
        assert after == before


@given(events_st)
def test_collapse_idempotent_and_sorted(events):
    once = collapse_daily(events)
    twice = collapse_daily(ingest.sequences_to_events(once))
    assert {u: s.entries for u, s in once.items()} == {u: s.entries for u, s in twice.items()}
    for seq in once.values():
        keys = [(d, a) for a, d, _ in seq.entries]
        assert keys == sorted(set(keys))
