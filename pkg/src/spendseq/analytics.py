"""Descriptive statistics over receipt logs: inequality, segments, app lifecycles."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .ingest import CATEGORIES, IN_APP, day_range, select_frequent_pairs


def spend_per_user(events, category=IN_APP) -> dict[str, int]:
    """Total amount per user, optionally restricted to one category."""
    out = defaultdict(int)
    for e in events:
        if category is None or e.category == category:
            out[e.user_id] += e.amount_cents
    return dict(out)


def _sorted_amounts(values):
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise DataError("no users to measure")
    if v[0] < 0:
        raise ValueError("amounts must be non-negative")
    if v[-1] <= 0:
        raise DataError("inequality undefined when every amount is zero")
    return v


def _lorenz_ordinates(v):
    cum = np.concatenate(([0.0], np.cumsum(v)))
    return cum / cum[-1]


def gini(spend_per_user) -> float:
    """Gini coefficient as one minus twice the trapezoid area under the Lorenz curve."""
    v = _sorted_amounts(spend_per_user.values() if isinstance(spend_per_user, dict) else spend_per_user)
    L = _lorenz_ordinates(v)
    area = (L[:-1].sum() + L[1:].sum()) / (2 * v.size)
    return float(1.0 - 2.0 * area)


@dataclass
class LorenzCurve:
    pop_frac: np.ndarray
    spend_frac: np.ndarray

    @property
    def points(self):
        return list(zip(self.pop_frac.tolist(), self.spend_frac.tolist()))

    def area(self) -> float:
        return float(np.sum(np.diff(self.pop_frac) * (self.spend_frac[1:] + self.spend_frac[:-1]) / 2))

    def share_at(self, pop_frac: float) -> float:
        """Spend fraction held by the bottom ``pop_frac`` of users (linear interpolation)."""
        return float(np.interp(pop_frac, self.pop_frac, self.spend_frac))

    def top_share(self, top_fraction: float) -> float:
        return 1.0 - self.share_at(1.0 - top_fraction)


def lorenz(spend_per_user) -> LorenzCurve:
    v = _sorted_amounts(spend_per_user.values() if isinstance(spend_per_user, dict) else spend_per_user)
    L = _lorenz_ordinates(v)
    pop = np.arange(v.size + 1) / v.size
    return LorenzCurve(pop, L)


@dataclass
class CategoryShare:
    category: str
    n_users: int
    n_purchases: int
    spend_cents: int
    user_share: float
    purchase_share: float
    spend_share: float


def category_summary(events) -> list[CategoryShare]:
    """Share of users, purchases and spend per category.

    user_share counts a user in every category they bought from, so that
    column can sum to more than one.
    """
    users = defaultdict(set)
    purchases = Counter()
    spend = Counter()
    all_users = set()
    for e in events:
        users[e.category].add(e.user_id)
        purchases[e.category] += 1
        spend[e.category] += e.amount_cents
        all_users.add(e.user_id)
    if not all_users:
        return []
    n_users = len(all_users)
    n_purchases = sum(purchases.values())
    total_spend = sum(spend.values())
    rows = []
    for cat in CATEGORIES:
        if cat not in purchases:
            continue
        rows.append(
            CategoryShare(
                cat,
                len(users[cat]),
                purchases[cat],
                spend[cat],
                len(users[cat]) / n_users,
                purchases[cat] / n_purchases,
                spend[cat] / total_spend if total_spend else 0.0,
            )
        )
    return rows


def top_users(spend_per_user: dict, top_fraction: float) -> list:
    """ceil(top_fraction * N) users by descending spend, ties by user_id."""
    if not 0.0 < top_fraction < 1.0:
        raise ValueError("top_fraction must be in (0, 1)")
    k = math.ceil(top_fraction * len(spend_per_user))
    ranked = sorted(spend_per_user.items(), key=lambda kv: (-kv[1], kv[0]))
    return [u for u, _ in ranked[:k]]


@dataclass
class SegmentReport:
    segment_size: int
    spend_share: float
    members: list = field(repr=False, default_factory=list)
    median_age_by_gender: dict = field(default_factory=dict)
    gender_shares: dict = field(default_factory=dict)
    rest_gender_shares: dict = field(default_factory=dict)
    country_lift: dict = field(default_factory=dict)


def _gender_shares(profiles_list):
    counts = Counter(p.gender for p in profiles_list if p.gender)
    total = sum(counts.values())
    return {g: counts[g] / total for g in sorted(counts)} if total else {}


def _median_age_by_gender(profiles_list):
    ages = defaultdict(list)
    for p in profiles_list:
        if p.gender and p.age is not None:
            ages[p.gender].append(p.age)
    return {g: float(np.median(a)) for g, a in sorted(ages.items())}


def big_spenders(spend_per_user: dict, top_fraction=0.01, profiles=None) -> SegmentReport:
    """Top spenders' share of spend and their demographic contrast with everyone else.

    country_lift[c] is P(big | country c) / P(big), computed over users with a
    known country.
    """
    members = top_users(spend_per_user, top_fraction)
    total = sum(spend_per_user.values())
    share = sum(spend_per_user[u] for u in members) / total if total else 0.0
    report = SegmentReport(len(members), share, members)
    if not profiles:
        return report
    member_set = set(members)
    seg = [profiles[u] for u in members if u in profiles]
    rest = [profiles[u] for u in spend_per_user if u not in member_set and u in profiles]
    report.median_age_by_gender = {
        "segment": _median_age_by_gender(seg),
        "rest": _median_age_by_gender(rest),
    }
    report.gender_shares = _gender_shares(seg)
    report.rest_gender_shares = _gender_shares(rest)
    all_c = Counter(p.country for p in seg + rest if p.country)
    seg_c = Counter(p.country for p in seg if p.country)
    n_all, n_seg = sum(all_c.values()), sum(seg_c.values())
    if n_seg:
        report.country_lift = {
            c: (seg_c[c] / n_seg) / (all_c[c] / n_all) for c in sorted(all_c)
        }
    return report


def income_fractions(spend_per_user, profiles, top_fraction=0.01, min_group=100, country=None):
    """Fraction of big spenders per income bracket, for brackets with at least ``min_group`` users.

    Returns rows ``(income_bracket, n_users, big_fraction)`` sorted by bracket.
    """
    big = set(top_users(spend_per_user, top_fraction))
    groups = defaultdict(list)
    for u in spend_per_user:
        p = profiles.get(u)
        if p is None or p.income_bracket is None:
            continue
        if country is not None and p.country != country:
            continue
        groups[p.income_bracket].append(u in big)
    return [
        (b, len(flags), sum(flags) / len(flags))
        for b, flags in sorted(groups.items())
        if len(flags) >= min_group
    ]


def spend_by_group(spend_per_user, profiles, key, min_group=1):
    """Per-group user count, median and mean spend; ``key`` is a UserProfile field name.

    Age is grouped by decade. Rows are ``(group, n_users, median, mean)``.
    """
    groups = defaultdict(list)
    for u, amount in spend_per_user.items():
        p = profiles.get(u)
        if p is None:
            continue
        g = getattr(p, key)
        if g is None:
            continue
        if key == "age":
            g = 10 * (g // 10)
        groups[g].append(amount)
    return [
        (g, len(v), float(np.median(v)), float(np.mean(v)))
        for g, v in sorted(groups.items())
        if len(v) >= min_group
    ]


def top_apps(events, profiles=None, k=10, category=IN_APP):
    """Apps by earnings with purchase count, mean purchaser age and share of women purchasers."""
    earn, count = Counter(), Counter()
    buyers = defaultdict(set)
    for e in events:
        if e.category != category:
            continue
        earn[e.app_id] += e.amount_cents
        count[e.app_id] += 1
        buyers[e.app_id].add(e.user_id)
    ranked = sorted(earn, key=lambda a: (-earn[a], a))[:k]
    rows = []
    for app in ranked:
        ages, women, known = [], 0, 0
        for u in buyers[app]:
            p = (profiles or {}).get(u)
            if p is None:
                continue
            if p.age is not None:
                ages.append(p.age)
            if p.gender:
                known += 1
                women += p.gender == "F"
        rows.append(
            (
                app,
                earn[app],
                count[app],
                float(np.mean(ages)) if ages else float("nan"),
                women / known if known else float("nan"),
            )
        )
    return rows


def monthly_top_persistence(events, month_length_days=30, top_fraction=0.01):
    """Fraction of overall top spenders who are monthly top spenders in at most half the months.

    Months are fixed windows of ``month_length_days`` counted from day 0.
    Monthly tops are drawn from users with positive spend in that month.
    """
    totals = defaultdict(int)
    monthly = defaultdict(lambda: defaultdict(int))
    last_day = -1
    for e in events:
        totals[e.user_id] += e.amount_cents
        monthly[e.day // month_length_days][e.user_id] += e.amount_cents
        last_day = max(last_day, e.day)
    n_months = last_day // month_length_days + 1
    if n_months < 2:
        raise DataError("need a span of at least two months")
    overall = top_users(totals, top_fraction)
    hits = Counter()
    for m in range(n_months):
        active = {u: s for u, s in monthly[m].items() if s > 0}
        if active:
            hits.update(top_users(active, top_fraction))
    few = sum(1 for u in overall if hits[u] <= n_months / 2)
    return few / len(overall)


@dataclass
class LifecycleCurves:
    """Per-position normalized delay and spend, averaged across (user, app) pairs.

    Position 1 is the reference: its normalized value is exactly 1.0 for every
    included pair.
    """

    positions: np.ndarray
    delay_mean: np.ndarray
    delay_median: np.ndarray
    spend_mean: np.ndarray
    spend_median: np.ndarray
    n_pairs: int
    n_excluded: int

    @property
    def last_first_ratio(self) -> float:
        return float(self.delay_mean[-1])


def _curves(windows, n_positions):
    delays, spends, excluded = [], [], 0
    for entries in windows:
        days = np.array([e[1] for e in entries], dtype=float)
        amounts = np.array([e[2] for e in entries], dtype=float)
        d = np.diff(days)[:n_positions]
        s = amounts[:n_positions]
        if d[0] <= 0 or s[0] <= 0:
            excluded += 1
            continue
        delays.append(d / d[0])
        spends.append(s / s[0])
    if not delays:
        nan = np.full(n_positions, np.nan)
        return LifecycleCurves(np.arange(1, n_positions + 1), nan, nan, nan, nan, 0, excluded)
    D, S = np.array(delays), np.array(spends)
    return LifecycleCurves(
        np.arange(1, n_positions + 1),
        D.mean(0),
        np.median(D, 0),
        S.mean(0),
        np.median(S, 0),
        len(delays),
        excluded,
    )


def adoption_curves(frequent_pairs, n_positions=10) -> LifecycleCurves:
    """Delays and spend over the first purchase-days of each pair.

    Delay k is the gap between purchase-days k and k+1, divided by the first
    gap; spend k is the amount on purchase-day k divided by the first amount.
    Pairs whose first gap or first amount is zero are excluded and counted.
    """
    windows = [entries[: n_positions + 1] for _, _, entries in frequent_pairs if len(entries) > n_positions]
    return _curves(windows, n_positions)


def abandonment_curves(frequent_pairs, n_positions=10) -> LifecycleCurves:
    """Mirror of :func:`adoption_curves` over the last purchase-days of each pair.

    Delays use the final ``n_positions`` gaps, anchored at the earliest of them,
    so ``last_first_ratio`` compares the very last gap with that anchor. Spend
    covers the final ``n_positions`` purchase-days.
    """
    delays_w, spend_w = [], []
    for _, _, entries in frequent_pairs:
        if len(entries) <= n_positions:
            continue
        delays_w.append(entries[-(n_positions + 1):])
        spend_w.append(entries[-n_positions:])
    curves = _curves(delays_w, n_positions)
    # spend is re-anchored on the last n purchase-days rather than n+1
    spends, excluded = [], 0
    for entries in spend_w:
        s = np.array([e[2] for e in entries], dtype=float)
        if s[0] <= 0:
            excluded += 1
            continue
        spends.append(s / s[0])
    if spends:
        S = np.array(spends)
        curves.spend_mean, curves.spend_median = S.mean(0), np.median(S, 0)
    return curves


@dataclass
class SwitchingResult:
    threshold: int
    n_pairs: int
    switch_rate: float
    base_rate: float
    lift: float | None


def switching_lift(sequences, thresholds=(50, 100), window=None, margin_days=30):
    """How much likelier frequent buyers who abandon an app are to become frequent elsewhere.

    switch_rate is the fraction of frequent (user, app) pairs whose user buys
    more than ``threshold`` times from another app whose first purchase comes
    strictly after the abandoned app's last purchase. base_rate is the fraction
    of all users with more than ``threshold`` purchases in at least one app.
    lift is None when either rate is zero.
    """
    if window is None:
        window = day_range(sequences)
    out = []
    for threshold in thresholds:
        # per user: app -> (first_day, last_day, count)
        stats = {}
        frequent_users = 0
        for user, seq in sequences.items():
            per_app = {}
            for app, day, _ in seq.entries:
                if app in per_app:
                    f, _, c = per_app[app]
                    per_app[app] = (f, day, c + 1)
                else:
                    per_app[app] = (day, day, 1)
            stats[user] = per_app
            if any(c > threshold for _, _, c in per_app.values()):
                frequent_users += 1
        pairs = select_frequent_pairs(sequences, threshold, window, margin_days)
        switched = 0
        for user, app, entries in pairs:
            last = entries[-1][1]
            if any(
                other != app and c > threshold and first > last
                for other, (first, _, c) in stats[user].items()
            ):
                switched += 1
        switch_rate = switched / len(pairs) if pairs else 0.0
        base_rate = frequent_users / len(sequences) if sequences else 0.0
        lift = switch_rate / base_rate if switch_rate > 0 and base_rate > 0 else None
        out.append(SwitchingResult(threshold, len(pairs), switch_rate, base_rate, lift))
    return out
