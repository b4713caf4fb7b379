"""App embeddings from purchase sequences and nearest-neighbour new-app prediction.

Skip-gram over each user's chronological app sequence: every app predicts
the apps within ``window`` positions of it. The softmax over the whole
vocabulary is replaced by negative sampling against the unigram
distribution raised to ``noise_power``. Training is plain minibatch SGD in
numpy with a linearly decaying learning rate; a single seeded generator
drives subsampling, shuffling and negative draws, so runs are bit-identical.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DataError


@dataclass
class TrainConfig:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr_fraction: float = 1e-4
    min_count: int = 5
    subsample_threshold: float = 1e-4
    noise_power: float = 0.75
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        for name in ("window", "negatives", "epochs", "min_count", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (self.initial_lr > 0 and self.subsample_threshold > 0):
            raise ValueError("learning rate and subsample threshold must be positive")


@dataclass
class EmbeddingModel:
    vocab: list
    vectors: np.ndarray
    context_vectors: np.ndarray
    counts: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.index = {a: i for i, a in enumerate(self.vocab)}
        self._unit = None
        self._order = None

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __contains__(self, app):
        return app in self.index

    def vector(self, app):
        if app not in self.index:
            raise KeyError(f"app {app!r} not in vocabulary")
        return self.vectors[self.index[app]]

    @property
    def unit_vectors(self):
        if self._unit is None:
            norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
            self._unit = self.vectors / np.where(norms > 0, norms, 1.0)
        return self._unit

    def neighbor_order(self, i):
        """Vocabulary indices sorted by descending cosine to app ``i``, ties by app_id, self excluded."""
        if self._order is None:
            self._order = {}
        if i not in self._order:
            sims = self.unit_vectors @ self.unit_vectors[i]
            # vocab is app_id sorted, so a stable sort on -sim breaks ties by app_id
            order = np.argsort(-sims, kind="stable")
            self._order[i] = (order[order != i], sims)
        return self._order[i]

    def save(self, path):
        """Text format: ``key=value`` header lines, a ``vectors`` line, then ``app_id v1 ... vd`` per app."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# spendseq embedding\n")
            fh.write(f"dim={self.dim}\n")
            fh.write(f"vocab_size={len(self.vocab)}\n")
            for k, v in asdict(self.config).items():
                fh.write(f"config.{k}={v}\n")
            fh.write("counts=" + ",".join(str(int(c)) for c in self.counts) + "\n")
            fh.write("vectors\n")
            for app, vec in zip(self.vocab, self.vectors):
                fh.write(f"{app} " + " ".join(repr(float(v)) for v in vec) + "\n")

    @classmethod
    def load(cls, path):
        header, rows = {}, []
        with open(path, encoding="utf-8") as fh:
            lines = iter(fh)
            for line in lines:
                line = line.strip()
                if line.startswith("#") or not line:
                    continue
                if line == "vectors":
                    break
                k, v = line.split("=", 1)
                header[k] = v
            for line in lines:
                parts = line.split()
                if parts:
                    rows.append(parts)
        cfg_fields = TrainConfig.__dataclass_fields__
        cfg = {}
        for k, v in header.items():
            if k.startswith("config."):
                name = k[len("config."):]
                cfg[name] = float(v) if cfg_fields[name].type == "float" else int(v)
        vocab = [r[0] for r in rows]
        counts = np.array([int(c) for c in header["counts"].split(",") if c], dtype=np.int64)
        vectors = np.array([[float(x) for x in r[1:]] for r in rows]).reshape(len(rows), int(header["dim"]))
        return cls(vocab, vectors, np.zeros_like(vectors), counts, TrainConfig(**cfg))


def build_vocab(sequences, min_count):
    counts = Counter(a for seq in sequences for a in seq)
    vocab = sorted(a for a, c in counts.items() if c >= min_count)
    return vocab, np.array([counts[a] for a in vocab], dtype=np.int64)


def noise_distribution(counts, power):
    w = np.asarray(counts, dtype=float) ** power
    return w / w.sum()


def _epoch_pairs(encoded, keep_prob, window, rng):
    centers, contexts = [], []
    for seq in encoded:
        if keep_prob is not None and seq.size:
            seq = seq[rng.random(seq.size) < keep_prob[seq]]
        n = seq.size
        if n < 2:
            continue
        for off in range(1, min(window, n - 1) + 1):
            a, b = seq[:-off], seq[off:]
            centers.append(a)
            contexts.append(b)
            centers.append(b)
            contexts.append(a)
    if not centers:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    c = np.concatenate(centers)
    o = np.concatenate(contexts)
    mask = c != o
    return c[mask], o[mask]


def ns_objective(W, C, centers, contexts, negatives):
    """Sum over pairs of log s(w.c) + sum_k log s(-w.n_k) for fixed negatives."""
    w = W[centers]
    pos = np.einsum("ij,ij->i", w, C[contexts])
    neg = np.einsum("ij,ikj->ik", w, C[negatives])
    return float(-np.logaddexp(0, -pos).sum() - np.logaddexp(0, neg).sum())


def _sgd_step(W, C, centers, contexts, negatives, lr):
    w = W[centers]
    vo = C[contexts]
    vn = C[negatives]
    sp = expit(np.einsum("ij,ij->i", w, vo))
    sn = expit(np.einsum("ij,ikj->ik", w, vn))
    gp = 1.0 - sp
    gn = -sn * (negatives != contexts[:, None])
    grad_w = gp[:, None] * vo + np.einsum("ik,ikj->ij", gn, vn)
    np.add.at(C, contexts, lr * gp[:, None] * w)
    np.add.at(C, negatives.ravel(), lr * (gn[..., None] * w[:, None, :]).reshape(-1, w.shape[1]))
    np.add.at(W, centers, lr * grad_w)


def train_embeddings(sequences, config: TrainConfig | None = None, callback=None) -> EmbeddingModel:
    """Learn app vectors from app-id sequences (one list per user, chronological).

    Pairs whose center and context are the same app are skipped; they carry no
    information about which apps go together. ``callback(epoch, batch, W, C)``
    is invoked after every minibatch when given.
    """
    config = config or TrainConfig()
    sequences = [list(s) for s in sequences]
    vocab, counts = build_vocab(sequences, config.min_count)
    if not vocab:
        raise DataError("empty vocabulary: no app reaches min_count")
    index = {a: i for i, a in enumerate(vocab)}
    encoded = [np.array([index[a] for a in s if a in index], dtype=np.int64) for s in sequences]
    rng = np.random.default_rng(config.seed)
    V, d = len(vocab), config.dim
    W = (rng.random((V, d)) - 0.5) / d
    C = np.zeros((V, d))
    noise_cdf = np.cumsum(noise_distribution(counts, config.noise_power))
    noise_cdf[-1] = 1.0
    freq = counts / counts.sum()
    t = config.subsample_threshold
    keep_prob = np.minimum(1.0, (np.sqrt(freq / t) + 1) * t / freq)
    if np.all(keep_prob >= 1.0):
        keep_prob = None
    # the per-epoch pair count varies with subsampling; decay uses an estimate
    est_pairs = max(1, sum(max(0, s.size - 1) for s in encoded) * 2 * config.window) * config.epochs
    seen = 0
    for epoch in range(config.epochs):
        centers, contexts = _epoch_pairs(encoded, keep_prob, config.window, rng)
        if centers.size == 0:
            continue
        perm = rng.permutation(centers.size)
        centers, contexts = centers[perm], contexts[perm]
        for b, start in enumerate(range(0, centers.size, config.batch_size)):
            c = centers[start : start + config.batch_size]
            o = contexts[start : start + config.batch_size]
            neg = np.searchsorted(noise_cdf, rng.random((c.size, config.negatives)), side="right")
            neg = np.minimum(neg, V - 1)
            frac = min(1.0, seen / est_pairs)
            lr = config.initial_lr * max(config.min_lr_fraction, 1.0 - frac)
            _sgd_step(W, C, c, o, neg, lr)
            seen += c.size
            if callback is not None:
                callback(epoch, b, W, C)
    return EmbeddingModel(vocab, W, C, counts, config)


# ---------------------------------------------------------- gradient oracles

def softmax_gradient(W, C, centers, contexts):
    """Gradient of sum log softmax(C @ w_center)[context] over a batch of pairs.

    Exact over the full vocabulary; practical only for small vocabularies.
    Returns (dW, dC).
    """
    gW, gC = np.zeros_like(W), np.zeros_like(C)
    for i, c in zip(centers, contexts):
        s = C @ W[i]
        p = np.exp(s - s.max())
        p /= p.sum()
        e = -p
        e[c] += 1.0
        gW[i] += C.T @ e
        gC += np.outer(e, W[i])
    return gW, gC


def negative_sampling_gradient(W, C, centers, contexts, noise, negatives):
    """Gradient of the negative-sampling objective with the noise expectation taken exactly.

    Objective per pair: log s(c.w) + negatives * E_{n~noise}[log s(-n.w)].
    Averaging the sampled training gradient over negative draws converges to
    this. Returns (dW, dC).
    """
    noise = np.asarray(noise, dtype=float)
    gW, gC = np.zeros_like(W), np.zeros_like(C)
    for i, c in zip(centers, contexts):
        w = W[i]
        sig = 1.0 / (1.0 + np.exp(-(C @ w)))
        e = -negatives * noise * sig
        e[c] += 1.0 - sig[c]
        gW[i] += C.T @ e
        gC += np.outer(e, w)
    return gW, gC


def sampled_negative_gradient(W, C, centers, contexts, negatives_idx):
    """Gradient of the sampled objective for explicit negatives, as applied by training."""
    gW, gC = np.zeros_like(W), np.zeros_like(C)
    for i, c, negs in zip(centers, contexts, negatives_idx):
        w = W[i]
        e = np.zeros(C.shape[0])
        e[c] += 1.0 - 1.0 / (1.0 + np.exp(-(C[c] @ w)))
        for n in negs:
            if n != c:
                e[n] -= 1.0 / (1.0 + np.exp(-(C[n] @ w)))
        gW[i] += C.T @ e
        gC += np.outer(e, w)
    return gW, gC


# ----------------------------------------------------------------- inference

def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def nearest(model: EmbeddingModel, app, k: int):
    """Top-k (app, cosine) by descending cosine, excluding the query; ties by app_id."""
    if app not in model.index:
        raise KeyError(f"app {app!r} not in vocabulary")
    if k <= 0:
        return []
    order, sims = model.neighbor_order(model.index[app])
    return [(model.vocab[j], float(sims[j])) for j in order[:k]]


def predict_new_apps(model: EmbeddingModel, user_train_apps, quota=None, mode="ranked", seed=None):
    """Predict apps the user has not bought from yet.

    The candidate pool holds, for every in-vocabulary training app, its most
    similar app the user does not already own. ``ranked`` takes the quota by
    descending cosine; ``random`` samples it uniformly from the pool. A pool
    smaller than the quota is topped up round-robin with each training app's
    next-nearest unowned neighbours.
    """
    owned = set(user_train_apps)
    k = len(owned)
    if quota is None:
        quota = math.ceil(k / 4)
    seeds = sorted(model.index[a] for a in owned if a in model.index)
    if not seeds:
        raise DataError("none of the user's apps is in the embedding vocabulary")
    if mode not in ("ranked", "random"):
        raise ValueError("mode must be 'ranked' or 'random'")
    owned_idx = {model.index[a] for a in owned if a in model.index}
    cursors = {}
    pool = {}

    def next_unowned(i):
        order, sims = model.neighbor_order(i)
        pos = cursors.get(i, 0)
        while pos < order.size:
            j = int(order[pos])
            pos += 1
            if j not in owned_idx and j not in pool:
                cursors[i] = pos
                return j, float(sims[j])
        cursors[i] = pos
        return None

    for i in seeds:
        hit = next_unowned(i)
        if hit is not None:
            pool[hit[0]] = hit[1]
    candidates = sorted(pool.items(), key=lambda kv: (-kv[1], model.vocab[kv[0]]))
    if mode == "ranked" or len(candidates) <= quota:
        chosen = [j for j, _ in candidates[:quota]]
    else:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(candidates), size=quota, replace=False)
        chosen = [candidates[p][0] for p in sorted(picks)]
    exhausted = set()
    while len(chosen) < quota and len(exhausted) < len(seeds):
        for i in seeds:
            if len(chosen) >= quota:
                break
            if i in exhausted:
                continue
            hit = next_unowned(i)
            if hit is None:
                exhausted.add(i)
                continue
            pool[hit[0]] = hit[1]
            chosen.append(hit[0])
    return [model.vocab[j] for j in chosen]


def popularity_baseline(train_counts, user_train_apps, quota):
    """Most purchased apps overall that the user does not own, ties by app_id."""
    owned = set(user_train_apps)
    ranked = sorted(train_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [a for a, _ in ranked if a not in owned][:quota]


def evaluate_new_app(predictions, held_out_new_apps) -> float:
    """Share of predicted apps the user actually bought for the first time in the test window."""
    hits = total = 0
    for user, preds in predictions.items():
        actual = held_out_new_apps.get(user, set())
        hits += sum(1 for a in preds if a in actual)
        total += len(preds)
    return hits / total if total else 0.0
