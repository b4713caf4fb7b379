"""New-app vs. repurchase classification of a user's next in-app purchase.

Examples are built from day-collapsed sequences. An entry is a *repurchase*
when the same app appears on an earlier day of the user's sequence; its
features use only entries from strictly earlier days.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DataError

FEATURE_VERSION = 1
FEATURE_NAMES = (
    "pct_repurchase",
    "prev_class",
    "prev2_class",
    "prev3_class",
    "gender_m",
    "mean_interpurchase_days",
    "days_since_last",
    "total_repurchases",
    "day_of_purchase",
    "age",
    "avg_time_between_repurchases",
    "total_purchases",
    "n_distinct_apps",
)
REPURCHASE, NEW_APP = 1, 0
LABEL_NAMES = {REPURCHASE: "Repurchase", NEW_APP: "NewApp"}
MIN_HISTORY = 4


@dataclass
class NoveltyExample:
    features: np.ndarray
    label: int
    user_id: str
    day: int
    app_id: str = ""

    @property
    def label_name(self):
        return LABEL_NAMES[self.label]


def novelty_features(history, day, profile) -> np.ndarray:
    """Feature vector for a purchase on ``day`` given the user's earlier entries.

    ``history`` is the list of ``(app_id, day, amount)`` entries, in sequence
    order, all strictly before ``day``. This is the from-scratch reference; the
    extractor maintains the same quantities incrementally.
    """
    classes, repurchase_gaps = [], []
    last_seen = {}
    for app, d, _ in history:
        if app in last_seen:
            classes.append(REPURCHASE)
            repurchase_gaps.append(d - last_seen[app])
        else:
            classes.append(NEW_APP)
        last_seen[app] = d
    n = len(history)
    n_rep = sum(classes)
    return np.array(
        [
            n_rep / n,
            classes[-1],
            classes[-2],
            classes[-3],
            1.0 if profile.gender == "M" else 0.0,
            (history[-1][1] - history[0][1]) / (n - 1),
            day - history[-1][1],
            n_rep,
            day,
            profile.age,
            float(np.mean(repurchase_gaps)) if repurchase_gaps else 0.0,
            n,
            len(last_seen),
        ],
        dtype=float,
    )


def extract_novelty_examples(sequences, profiles, min_history=MIN_HISTORY):
    """One example per purchase entry with at least ``min_history`` earlier-day entries.

    Users without a profile, age or gender are skipped; the count of examples
    lost that way is returned alongside.

    Returns
    -------
    (list of NoveltyExample, int skipped)
    """
    examples, skipped = [], 0
    for user in sorted(sequences):
        entries = sequences[user].entries
        profile = (profiles or {}).get(user)
        complete = profile is not None and profile.age is not None and profile.gender is not None
        # running state over committed (earlier-day) entries
        classes = []
        last_seen = {}
        rep_gap_sum, n_rep = 0, 0
        first_day = last_day = None
        i = 0
        while i < len(entries):
            day = entries[i][1]
            j = i
            while j < len(entries) and entries[j][1] == day:
                j += 1
            n = len(classes)
            if n >= min_history:
                if not complete:
                    skipped += j - i
                else:
                    base = [
                        n_rep / n,
                        classes[-1],
                        classes[-2],
                        classes[-3],
                        1.0 if profile.gender == "M" else 0.0,
                        (last_day - first_day) / (n - 1),
                        day - last_day,
                        n_rep,
                        day,
                        profile.age,
                        rep_gap_sum / n_rep if n_rep else 0.0,
                        n,
                        len(last_seen),
                    ]
                    feats = np.array(base, dtype=float)
                    for app, _, _ in entries[i:j]:
                        label = REPURCHASE if app in last_seen else NEW_APP
                        examples.append(NoveltyExample(feats, label, user, day, app))
            # commit the whole day
            for app, d, _ in entries[i:j]:
                if app in last_seen:
                    classes.append(REPURCHASE)
                    n_rep += 1
                    rep_gap_sum += d - last_seen[app]
                else:
                    classes.append(NEW_APP)
                if first_day is None:
                    first_day = d
                last_day = d
            for app, d, _ in entries[i:j]:
                last_seen[app] = d
            i = j
    return examples, skipped


def feature_matrix(examples):
    X = np.array([e.features for e in examples], dtype=float)
    if X.ndim != 2:
        X = X.reshape(len(examples), len(FEATURE_NAMES))
    y = np.array([e.label for e in examples], dtype=float)
    return X, y


def correlation_matrix(X) -> np.ndarray:
    """Pearson correlations with zero-variance columns treated as uncorrelated."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(0)
    sd = np.sqrt((Xc * Xc).mean(0))
    const = sd == 0
    Z = Xc / np.where(const, 1.0, sd)
    R = Z.T @ Z / X.shape[0]
    R[const, :] = 0.0
    R[:, const] = 0.0
    np.fill_diagonal(R, 1.0)
    return R


def prune_correlated(examples, threshold=0.7) -> list[int]:
    """Indices kept after dropping the later feature of every pair with |r| > threshold.

    Pairs are scanned in feature order and a feature already dropped no longer
    removes others.
    """
    if len(examples) < 2:
        raise DataError("need at least two examples to estimate correlations")
    X = examples if isinstance(examples, np.ndarray) else feature_matrix(examples)[0]
    R = correlation_matrix(X)
    n = R.shape[0]
    dropped = set()
    for i in range(n):
        if i in dropped:
            continue
        for j in range(i + 1, n):
            if j not in dropped and abs(R[i, j]) > threshold:
                dropped.add(j)
    return [i for i in range(n) if i not in dropped]


@dataclass
class NoveltyModel:
    feature_names: tuple
    kept: list
    means: np.ndarray
    sds: np.ndarray
    weights: np.ndarray
    intercept: float
    l2: float = 1e-4
    iterations: int = 0
    feature_version: int = FEATURE_VERSION

    @property
    def kept_names(self):
        return [self.feature_names[i] for i in self.kept]

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        return (X[..., self.kept] - self.means) / self.sds

    def decision(self, X):
        return self.standardize(X) @ self.weights + self.intercept

    def predict_proba(self, X):
        """P(repurchase) for each row of a full-width feature matrix."""
        return _sigmoid(self.decision(X))

    def raw_coefficients(self):
        """Weights and intercept mapped back to unstandardized feature units."""
        w = self.weights / self.sds
        return w, float(self.intercept - np.sum(w * self.means))

    def to_dict(self):
        d = {
            "feature_version": self.feature_version,
            "l2": self.l2,
            "intercept": self.intercept,
            "iterations": self.iterations,
        }
        for k, i in enumerate(self.kept):
            name = self.feature_names[i]
            d[f"mean.{name}"] = float(self.means[k])
            d[f"sd.{name}"] = float(self.sds[k])
            d[f"weight.{name}"] = float(self.weights[k])
        d["features"] = ",".join(self.feature_names)
        d["kept"] = ",".join(self.kept_names)
        return d

    @classmethod
    def from_dict(cls, d):
        names = tuple(d["features"].split(","))
        kept_names = [n for n in d["kept"].split(",") if n]
        kept = [names.index(n) for n in kept_names]
        return cls(
            names,
            kept,
            np.array([d[f"mean.{n}"] for n in kept_names]),
            np.array([d[f"sd.{n}"] for n in kept_names]),
            np.array([d[f"weight.{n}"] for n in kept_names]),
            float(d["intercept"]),
            float(d["l2"]),
            int(d.get("iterations", 0)),
            int(d.get("feature_version", FEATURE_VERSION)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalized_nll(params, Z, y, l2):
    """Mean negative log-likelihood plus (l2/2)||w||^2; params = (w..., intercept)."""
    w, b = params[:-1], params[-1]
    z = Z @ w + b
    # log(1 + e^z) - y z, computed stably
    ll = np.logaddexp(0.0, z) - y * z
    return float(ll.mean() + 0.5 * l2 * w @ w)


def penalized_nll_gradient(params, Z, y, l2):
    w, b = params[:-1], params[-1]
    r = _sigmoid(Z @ w + b) - y
    gw = Z.T @ r / len(y) + l2 * w
    return np.append(gw, r.mean())


def train_logistic(examples, kept=None, l2=1e-4, tol=1e-8, max_iter=500) -> NoveltyModel:
    """L2-penalized logistic regression on standardized features by Newton's method.

    The intercept is not penalized. Converged when the gradient norm of the
    mean penalized negative log-likelihood drops below ``tol``.
    """
    if isinstance(examples, tuple):
        X, y = examples
    else:
        X, y = feature_matrix(examples)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if kept is None:
        kept = list(range(X.shape[1]))
    if y.size == 0 or y.min() == y.max():
        raise DataError("both classes must be present to train")
    Xk = X[:, kept]
    means = Xk.mean(0)
    sds = Xk.std(0)
    sds = np.where(sds > 0, sds, 1.0)
    Z = (Xk - means) / sds
    n, p = Z.shape
    params = np.zeros(p + 1)
    params[-1] = math.log(y.mean() / (1 - y.mean()))
    Zb = np.column_stack([Z, np.ones(n)])
    reg = np.full(p + 1, l2)
    reg[-1] = 0.0
    f = penalized_nll(params, Z, y, l2)
    for it in range(1, max_iter + 1):
        g = penalized_nll_gradient(params, Z, y, l2)
        if np.linalg.norm(g) < tol:
            break
        prob = _sigmoid(Zb @ params)
        H = (Zb * (prob * (1 - prob))[:, None]).T @ Zb / n + np.diag(reg)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while True:
            cand = params - t * step
            f_new = penalized_nll(cand, Z, y, l2)
            if f_new <= f + 1e-4 * t * (g @ -step) or t < 1e-10:
                break
            t *= 0.5
        params, f = cand, f_new
    else:
        g = penalized_nll_gradient(params, Z, y, l2)
        if np.linalg.norm(g) >= tol:
            raise ConvergenceError(
                f"logistic regression gradient norm {np.linalg.norm(g):.3g} after {max_iter} iterations",
                last=params,
            )
    return NoveltyModel(FEATURE_NAMES, list(kept), means, sds, params[:-1].copy(), float(params[-1]), l2, it)


def predict_novelty(model: NoveltyModel, example):
    """(P(repurchase), class) with Repurchase iff the probability is at least 0.5."""
    x = example.features if isinstance(example, NoveltyExample) else np.asarray(example, dtype=float)
    prob = float(model.predict_proba(x[None, :])[0])
    return prob, REPURCHASE if prob >= 0.5 else NEW_APP


@dataclass
class ClassifierMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    n: int = field(init=False)

    def __post_init__(self):
        self.n = self.tp + self.fp + self.fn + self.tn

    @property
    def confusion(self):
        return np.array([[self.tp, self.fn], [self.fp, self.tn]])

    @classmethod
    def from_labels(cls, y_true, y_pred):
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if y_true.size == 0:
            raise DataError("empty evaluation set")
        tp = int(np.sum((y_true == 1) & (y_pred == 1)))
        fp = int(np.sum((y_true == 0) & (y_pred == 1)))
        fn = int(np.sum((y_true == 1) & (y_pred == 0)))
        tn = int(np.sum((y_true == 0) & (y_pred == 0)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls((tp + tn) / y_true.size, precision, recall, f1, tp, fp, fn, tn)


def evaluate_novelty(model: NoveltyModel, test_examples) -> ClassifierMetrics:
    """Accuracy, precision, recall, F1 and confusion counts with Repurchase as positive."""
    if not len(test_examples):
        raise DataError("empty test set")
    X, y = feature_matrix(test_examples)
    pred = (model.predict_proba(X) >= 0.5).astype(int)
    return ClassifierMetrics.from_labels(y, pred)


def majority_baseline(train_examples, test_examples) -> ClassifierMetrics:
    """Always predict the training set's majority class."""
    y_train = np.array([e.label for e in train_examples])
    majority = REPURCHASE if y_train.mean() >= 0.5 else NEW_APP
    y = np.array([e.label for e in test_examples])
    return ClassifierMetrics.from_labels(y, np.full(y.size, majority))
