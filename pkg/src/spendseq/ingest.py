"""Receipt-log parsing and per-user day-granular purchase sequences.

The receipt log is a UTF-8 CSV with header
``user_id,app_id,category,day,amount_cents``. Profiles live in a separate CSV
``user_id,age,gender,country,income_bracket`` where any field but the id may
be empty.
"""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import DataError

CATEGORIES = ("App", "Song", "Movie", "TVShow", "Book", "InApp")
IN_APP = "InApp"
LOG_HEADER = ("user_id", "app_id", "category", "day", "amount_cents")
PROFILE_HEADER = ("user_id", "age", "gender", "country", "income_bracket")

# app_id used for entries pooled across apps by the (user, day) merge variant
POOLED_APP = "*"


@dataclass(frozen=True, slots=True)
class PurchaseEvent:
    user_id: str
    app_id: str
    category: str
    day: int
    amount_cents: int


@dataclass(frozen=True, slots=True)
class RejectedLine:
    line_no: int
    text: str
    reason: str


@dataclass(frozen=True, slots=True)
class UserProfile:
    user_id: str
    age: int | None = None
    gender: str | None = None
    country: str | None = None
    income_bracket: int | None = None


@dataclass
class DaySequence:
    """Chronological purchase entries ``(app_id, day, amount_cents)`` of one user."""

    user_id: str
    entries: list[tuple[str, int, int]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @property
    def apps(self):
        return [e[0] for e in self.entries]

    @property
    def days(self):
        return [e[1] for e in self.entries]

    @property
    def amounts(self):
        return [e[2] for e in self.entries]


def _parse_fields(fields, span_days):
    if len(fields) != 5:
        return None, "field-count"
    user_id, app_id, category, day_s, amount_s = (f.strip() for f in fields)
    if not user_id or not app_id:
        return None, "empty-id"
    if category not in CATEGORIES:
        return None, "unknown-category"
    try:
        day = int(day_s)
    except ValueError:
        return None, "bad-day"
    try:
        amount = int(amount_s)
    except ValueError:
        return None, "bad-amount"
    if day < 0 or (span_days is not None and day >= span_days):
        return None, "day-out-of-range"
    if amount < 0:
        return None, "negative-amount"
    return PurchaseEvent(user_id, app_id, category, day, amount), None


def parse_receipt_log(lines: Iterable[str], span_days: int | None = None):
    """Parse receipt lines into events, collecting malformed lines instead of failing.

    A header line, if present, must be the first line and is skipped. Blank
    lines are ignored.

    Returns
    -------
    (list of PurchaseEvent, list of RejectedLine)
    """
    events, rejected = [], []
    for line_no, line in enumerate(lines, start=1):
        text = line.rstrip("\r\n")
        if not text.strip():
            continue
        fields = next(csv.reader([text]))
        if line_no == 1 and tuple(f.strip() for f in fields) == LOG_HEADER:
            continue
        event, reason = _parse_fields(fields, span_days)
        if event is None:
            rejected.append(RejectedLine(line_no, text, reason))
        else:
            events.append(event)
    return events, rejected


def read_receipt_log(path, span_days=None):
    """Parse a receipt log file. I/O failures propagate as ``OSError``."""
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_receipt_log(fh, span_days=span_days)


def write_receipt_log(events: Iterable[PurchaseEvent], out) -> None:
    """Write events with header to a path or text stream."""
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_receipt_log(events, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOG_HEADER)
    for e in events:
        writer.writerow((e.user_id, e.app_id, e.category, e.day, e.amount_cents))


def format_receipt_log(events) -> str:
    buf = io.StringIO()
    write_receipt_log(events, buf)
    return buf.getvalue()


def write_rejects(rejected: Iterable[RejectedLine], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("line_no", "reason", "text"))
        for r in rejected:
            writer.writerow((r.line_no, r.reason, r.text))


def _opt_int(s):
    s = s.strip()
    return int(s) if s else None


def parse_profiles(lines: Iterable[str]):
    """Parse profile lines into ``{user_id: UserProfile}`` plus rejected lines."""
    profiles, rejected = {}, []
    for line_no, line in enumerate(lines, start=1):
        text = line.rstrip("\r\n")
        if not text.strip():
            continue
        fields = next(csv.reader([text]))
        if line_no == 1 and tuple(f.strip() for f in fields) == PROFILE_HEADER:
            continue
        if len(fields) != 5:
            rejected.append(RejectedLine(line_no, text, "field-count"))
            continue
        user_id, age_s, gender, country, income_s = (f.strip() for f in fields)
        try:
            age = _opt_int(age_s)
            income = _opt_int(income_s)
        except ValueError:
            rejected.append(RejectedLine(line_no, text, "bad-number"))
            continue
        if not user_id:
            reason = "empty-id"
        elif age is not None and not 10 <= age <= 100:
            reason = "age-out-of-range"
        elif gender not in ("", "M", "F"):
            reason = "unknown-gender"
        elif country and not (len(country) == 2 and country.isalpha() and country.isupper()):
            reason = "bad-country"
        elif income is not None and income < 0:
            reason = "negative-income"
        elif user_id in profiles:
            reason = "duplicate-user"
        else:
            reason = None
        if reason:
            rejected.append(RejectedLine(line_no, text, reason))
            continue
        profiles[user_id] = UserProfile(user_id, age, gender or None, country or None, income)
    return profiles, rejected


def read_profiles(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_profiles(fh)


def write_profiles(profiles, out) -> None:
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_profiles(profiles, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PROFILE_HEADER)
    items = profiles.values() if isinstance(profiles, dict) else profiles
    for p in items:
        writer.writerow(
            (
                p.user_id,
                "" if p.age is None else p.age,
                p.gender or "",
                p.country or "",
                "" if p.income_bracket is None else p.income_bracket,
            )
        )


def collapse_daily(events, category_filter=None, merge="app") -> dict[str, DaySequence]:
    """Merge same-day purchases into single, more expensive entries.

    ``merge="app"`` keys on (user, app, day); ``merge="day"`` pools every
    purchase of a user on one day into a single entry with app_id ``"*"``.
    Output entries are sorted by day, ties by app_id.
    """
    if merge not in ("app", "day"):
        raise ValueError(f"merge must be 'app' or 'day', got {merge!r}")
    totals = defaultdict(int)
    for e in events:
        if category_filter is not None and e.category != category_filter:
            continue
        app = POOLED_APP if merge == "day" else e.app_id
        totals[(e.user_id, e.day, app)] += e.amount_cents
    by_user = defaultdict(list)
    for (user, day, app), amount in totals.items():
        by_user[user].append((app, day, amount))
    out = {}
    for user in sorted(by_user):
        entries = by_user[user]
        entries.sort(key=lambda t: (t[1], t[0]))
        out[user] = DaySequence(user, entries)
    return out


def sequences_to_events(sequences, category=IN_APP) -> list[PurchaseEvent]:
    """Flatten sequences back into events tagged with a single category."""
    return [
        PurchaseEvent(seq.user_id, app, category, day, amount)
        for seq in sequences.values()
        for app, day, amount in seq.entries
    ]


def day_range(sequences):
    """(first_day, last_day) over all entries."""
    lo = hi = None
    for seq in sequences.values():
        if seq.entries:
            d0, d1 = seq.entries[0][1], seq.entries[-1][1]
            lo = d0 if lo is None else min(lo, d0)
            hi = d1 if hi is None else max(hi, d1)
    if lo is None:
        raise DataError("no purchase entries")
    return lo, hi


def split_day(first_day: int, last_day: int, fraction: float) -> int:
    """First day of the test slice for a chronological train/test split.

    Days ``< split`` train, days ``>= split`` test. ``fraction=1.0`` leaves the
    test slice empty, which callers treat as an error.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("split fraction must be in (0, 1]")
    span = last_day - first_day + 1
    return first_day + int(round(fraction * span))


def truncate_sequences(sequences, before_day: int) -> dict[str, DaySequence]:
    """Keep only entries strictly before ``before_day``; drops emptied users."""
    out = {}
    for user, seq in sequences.items():
        kept = [e for e in seq.entries if e[1] < before_day]
        if kept:
            out[user] = DaySequence(user, kept)
    return out


def select_frequent_pairs(sequences, min_purchases=50, window=None, margin_days=30):
    """(user, app) pairs with more than ``min_purchases`` entries away from the window edges.

    A pair qualifies when its first entry is on or after
    ``window[0] + margin_days`` and its last entry on or before
    ``window[1] - margin_days``, i.e. the whole usage span was observed.
    ``window`` defaults to the data's own first and last day.

    Returns a list of ``(user_id, app_id, entries)`` sorted by user then app,
    where entries are that pair's ``(app_id, day, amount)`` tuples.
    """
    if min_purchases < 1:
        raise ValueError("min_purchases must be >= 1")
    if window is None:
        window = day_range(sequences)
    first_day, last_day = window
    if first_day > last_day:
        raise ValueError(f"inverted window {window}")
    lo, hi = first_day + margin_days, last_day - margin_days
    out = []
    for user in sorted(sequences):
        per_app = defaultdict(list)
        for entry in sequences[user].entries:
            per_app[entry[0]].append(entry)
        for app in sorted(per_app):
            entries = per_app[app]
            if len(entries) > min_purchases and entries[0][1] >= lo and entries[-1][1] <= hi:
                out.append((user, app, entries))
    return out


def iter_app_runs(sequence: DaySequence) -> Iterator[tuple[str, list]]:
    """Yield ``(app_id, entries)`` for each app in a user's sequence, app-sorted."""
    per_app = defaultdict(list)
    for entry in sequence.entries:
        per_app[entry[0]].append(entry)
    for app in sorted(per_app):
        yield app, per_app[app]
