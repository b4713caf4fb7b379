"""Recency/frequency model of which owned app a re-purchase comes from.

For a re-purchase on day t, each earlier purchase j of app x_j casts a vote
s(f_j) * T(t - t_j), where f_j is how many times x_j had been bought up to and
including j and both functions are step tables over buckets. The probability
of app e is its share of the votes.

Both tables are positive and only their ratios matter, so each is pinned
with its first entry equal to one. Training alternates gradient descent on
log s with T fixed and on log T with s fixed.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DataError

# lower bounds of each bucket
FREQ_EDGES = (1, 2, 3, 4, 5, 10, 20, 50)
GAP_EDGES = (1, 2, 3, 5, 9, 17, 33, 65)


def freq_bucket(count, edges=FREQ_EDGES):
    """Bucket index for a cumulative purchase count (>= 1)."""
    return np.searchsorted(edges, count, side="right") - 1


def gap_bucket(gap, edges=GAP_EDGES):
    """Bucket index for a gap in days (>= 1)."""
    return np.searchsorted(edges, gap, side="right") - 1


@dataclass
class RepurchaseInstance:
    """Prior purchase days per candidate app, the day of the re-purchase and its app.

    ``target`` may be None when the instance is only used for prediction.
    """

    candidates: dict
    target: str | None
    day: int
    user_id: str = ""

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("instance needs at least one candidate")
        if self.target is not None and self.target not in self.candidates:
            raise ValueError("target must be one of the candidates")
        for days in self.candidates.values():
            if days and max(days) >= self.day:
                raise ValueError("prior purchase days must precede the instance day")


@dataclass
class RepeatModel:
    s_weights: np.ndarray = field(default_factory=lambda: np.ones(len(FREQ_EDGES)))
    t_weights: np.ndarray = field(default_factory=lambda: np.ones(len(GAP_EDGES)))
    freq_edges: tuple = FREQ_EDGES
    gap_edges: tuple = GAP_EDGES

    def __post_init__(self):
        self.s_weights = np.asarray(self.s_weights, dtype=float)
        self.t_weights = np.asarray(self.t_weights, dtype=float)
        if self.s_weights.size != len(self.freq_edges) or self.t_weights.size != len(self.gap_edges):
            raise ValueError("weight tables must match their bucket edges")
        if np.any(self.s_weights < 0) or np.any(self.t_weights < 0):
            raise ValueError("weights must be non-negative")

    def normalized(self):
        """Copy with each table divided by its first entry."""
        return RepeatModel(
            self.s_weights / self.s_weights[0],
            self.t_weights / self.t_weights[0],
            self.freq_edges,
            self.gap_edges,
        )

    def to_text(self) -> str:
        lines = [
            "# spendseq repeat model",
            "freq_edges=" + ",".join(map(str, self.freq_edges)),
            "gap_edges=" + ",".join(map(str, self.gap_edges)),
            "s_weights=" + ",".join(repr(float(v)) for v in self.s_weights),
            "t_weights=" + ",".join(repr(float(v)) for v in self.t_weights),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
        return cls(
            np.array([float(v) for v in kv["s_weights"].split(",")]),
            np.array([float(v) for v in kv["t_weights"].split(",")]),
            tuple(int(v) for v in kv["freq_edges"].split(",")),
            tuple(int(v) for v in kv["gap_edges"].split(",")),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def vote_counts(instance: RepurchaseInstance, freq_edges=FREQ_EDGES, gap_edges=GAP_EDGES):
    """Per-candidate counts of prior purchases in each (frequency, gap) bucket cell.

    Returns ``(apps, counts)`` with apps sorted and counts of shape
    (n_apps, n_freq_buckets, n_gap_buckets).
    """
    apps = sorted(instance.candidates)
    counts = np.zeros((len(apps), len(freq_edges), len(gap_edges)))
    for k, app in enumerate(apps):
        days = np.sort(np.asarray(instance.candidates[app], dtype=np.int64))
        if days.size == 0:
            continue
        fb = freq_bucket(np.arange(1, days.size + 1), freq_edges)
        gb = gap_bucket(instance.day - days, gap_edges)
        np.add.at(counts[k], (fb, gb), 1.0)
    return apps, counts


def score_candidates(model: RepeatModel, instance: RepurchaseInstance) -> dict:
    """Probability of each candidate app under the vote-share model."""
    apps, counts = vote_counts(instance, model.freq_edges, model.gap_edges)
    votes = np.einsum("i,kij,j->k", model.s_weights, counts, model.t_weights)
    total = votes.sum()
    if not total > 0:
        raise DataError("degenerate model: every prior purchase has zero weight")
    return dict(zip(apps, (votes / total).tolist()))


def predict_repeat(model: RepeatModel, instance: RepurchaseInstance) -> str:
    probs = score_candidates(model, instance)
    return min(probs, key=lambda a: (-probs[a], a))


def baseline_most_recent(instance: RepurchaseInstance) -> str:
    return min(instance.candidates, key=lambda a: (-max(instance.candidates[a]), a))


def baseline_most_frequent(instance: RepurchaseInstance) -> str:
    return min(instance.candidates, key=lambda a: (-len(instance.candidates[a]), a))


# ----------------------------------------------------------------- training

@dataclass
class CompiledInstances:
    """Target and all-candidate bucket-cell counts, one flattened row per instance."""

    target: np.ndarray
    total: np.ndarray
    n_freq: int = len(FREQ_EDGES)
    n_gap: int = len(GAP_EDGES)

    def __len__(self):
        return self.target.shape[0]


def compile_instances(instances, freq_edges=FREQ_EDGES, gap_edges=GAP_EDGES) -> CompiledInstances:
    nf, ng = len(freq_edges), len(gap_edges)
    cells = nf * ng
    tgt_idx, all_idx = [], []
    for i, inst in enumerate(instances):
        base = i * cells
        for app, days in inst.candidates.items():
            rows = [
                base + (bisect_right(freq_edges, k) - 1) * ng + bisect_right(gap_edges, inst.day - d) - 1
                for k, d in enumerate(sorted(days), 1)
            ]
            all_idx.extend(rows)
            if app == inst.target:
                tgt_idx.extend(rows)
    size = len(instances) * cells
    A = np.bincount(np.asarray(tgt_idx, dtype=np.int64), minlength=size).astype(float)
    B = np.bincount(np.asarray(all_idx, dtype=np.int64), minlength=size).astype(float)
    return CompiledInstances(A.reshape(-1, cells), B.reshape(-1, cells), nf, ng)


def negative_log_likelihood(data: CompiledInstances, s, t) -> float:
    w = np.outer(s, t).ravel()
    return float(np.sum(np.log(data.total @ w) - np.log(data.target @ w)))


def nll_gradients(data: CompiledInstances, s, t):
    """Gradients of the negative log-likelihood with respect to log s and log t."""
    w = np.outer(s, t).ravel()
    inv_num = 1.0 / (data.target @ w)
    inv_den = 1.0 / (data.total @ w)
    # d(-log P)/dw for each cell, summed over instances
    cell_grad = inv_den @ data.total - inv_num @ data.target
    G = cell_grad.reshape(data.n_freq, data.n_gap)
    return s * (G @ t), t * (s @ G)


def _descend_block(f, grad, u, max_iter, tol):
    """Gradient descent with Barzilai-Borwein steps and Armijo backtracking.

    Every accepted step lowers ``f``; stops when the relative improvement of a
    step falls below ``tol``.
    """
    fu = f(u)
    g = grad(u)
    step = 1.0 / max(1.0, np.linalg.norm(g))
    for _ in range(max_iter):
        gg = g @ g
        if gg == 0.0:
            break
        while True:
            cand = u - step * g
            fc = f(cand)
            if np.isfinite(fc) and fc <= fu - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-14:
                return u, fu
        g_new = grad(cand)
        du, dg = cand - u, g_new - g
        improvement = fu - fc
        u, g = cand, g_new
        prev, fu = fu, fc
        if improvement <= tol * max(1.0, abs(prev)):
            break
        denom = du @ dg
        step = (du @ du) / denom if denom > 0 else step * 2.0
    return u, fu


def train_repeat(instances, max_outer=50, inner_tol=1e-8, outer_tol=1e-6, max_inner=200, init=None):
    """Fit both weight tables by alternating block gradient descent in log space.

    ``instances`` may be a list of RepurchaseInstance or a CompiledInstances.
    The returned model carries ``trajectory``, the objective after each block,
    which never increases. Raises ConvergenceError with that trajectory when
    ``max_outer`` rounds pass without the relative outer improvement falling
    below ``outer_tol``.
    """
    data = instances if isinstance(instances, CompiledInstances) else compile_instances(instances)
    if len(data) == 0:
        raise DataError("need at least one re-purchase instance")
    model = init or RepeatModel()
    u = np.log(model.s_weights / model.s_weights[0])
    v = np.log(model.t_weights / model.t_weights[0])
    f_cur = negative_log_likelihood(data, np.exp(u), np.exp(v))
    trajectory = [f_cur]
    for outer in range(1, max_outer + 1):
        f_start = f_cur
        t = np.exp(v)
        u, f_cur = _descend_block(
            lambda x: negative_log_likelihood(data, np.exp(x), t),
            lambda x: nll_gradients(data, np.exp(x), t)[0],
            u,
            max_inner,
            inner_tol,
        )
        u = u - u[0]
        trajectory.append(f_cur)
        s = np.exp(u)
        v, f_cur = _descend_block(
            lambda x: negative_log_likelihood(data, s, np.exp(x)),
            lambda x: nll_gradients(data, s, np.exp(x))[1],
            v,
            max_inner,
            inner_tol,
        )
        v = v - v[0]
        trajectory.append(f_cur)
        if f_start - f_cur <= outer_tol * max(1.0, abs(f_start)):
            break
    else:
        result = RepeatModel(np.exp(u), np.exp(v))
        raise ConvergenceError(
            f"alternating optimization did not converge in {max_outer} rounds",
            last=result,
            trajectory=trajectory,
        )
    result = RepeatModel(np.exp(u), np.exp(v))
    result.trajectory = trajectory
    result.outer_iterations = outer
    return result


# --------------------------------------------------------------- evaluation

class RepeatMetrics(NamedTuple):
    model_acc: float
    recent_acc: float
    frequent_acc: float
    n: int


def evaluate_repeat(model: RepeatModel, test_instances) -> RepeatMetrics:
    """Top-1 accuracy of the model and both baselines on the same instances."""
    if not test_instances:
        raise DataError("empty test set")
    hits = Counter()
    for inst in test_instances:
        hits["model"] += predict_repeat(model, inst) == inst.target
        hits["recent"] += baseline_most_recent(inst) == inst.target
        hits["frequent"] += baseline_most_frequent(inst) == inst.target
    n = len(test_instances)
    return RepeatMetrics(hits["model"] / n, hits["recent"] / n, hits["frequent"] / n, n)


def build_repurchase_instances(sequences, day_range=None):
    """Instances for every re-purchase entry whose day falls in ``[lo, hi)``.

    Candidates are all apps bought on earlier days; prior days come from the
    full history, including days before ``lo``.
    """
    lo, hi = day_range if day_range is not None else (-math.inf, math.inf)
    out = []
    for user in sorted(sequences):
        entries = sequences[user].entries
        history = {}
        i = 0
        while i < len(entries):
            day = entries[i][1]
            j = i
            while j < len(entries) and entries[j][1] == day:
                j += 1
            if lo <= day < hi:
                for app, _, _ in entries[i:j]:
                    if app in history:
                        out.append(
                            RepurchaseInstance({a: list(d) for a, d in history.items()}, app, day, user)
                        )
            for app, d, _ in entries[i:j]:
                history.setdefault(app, []).append(d)
            i = j
    return out
