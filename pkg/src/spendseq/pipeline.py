"""End-to-end staged next-purchase prediction and run manifests.

Stages run in order on a global chronological split: inter-purchase time
fit, novelty classifier, app embeddings, repeat model, then the composed
predictor that routes each test purchase through the novelty classifier to
either the new-app or the re-purchase predictor. Each stage writes its metric
file as soon as it finishes, so a failure leaves earlier outputs in place.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from collections import Counter

import numpy as np

from . import __version__, embed, ingest, novelty, repeat, temporal
from .errors import DataError

MANIFEST_NAME = "manifest.json"


# ------------------------------------------------------------------ manifest

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(out_dir, argv, seed, inputs=(), config_text="", started=None, status="ok", extra=None):
    """Write the single run manifest of ``out_dir`` and return its dict."""
    manifest = {
        "command": list(argv),
        "config_digest": text_digest(config_text),
        "inputs": {str(p): file_digest(p) for p in inputs if p and os.path.exists(p)},
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "duration_s": round(time.time() - started, 3) if started is not None else 0.0,
        "status": status,
    }
    if extra:
        manifest.update(extra)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ------------------------------------------------------- stage helpers

def app_sequences(sequences):
    """App-id token lists per user in sorted user order."""
    return [seq.apps for _, seq in sorted(sequences.items())]


def new_app_split(sequences, split):
    """Per user with purchases on both sides of ``split``: (training apps, apps new in the test window)."""
    out = {}
    for user in sorted(sequences):
        entries = sequences[user].entries
        train = list(dict.fromkeys(a for a, d, _ in entries if d < split))
        test = [a for a, d, _ in entries if d >= split]
        if train and test:
            owned = set(train)
            out[user] = (train, {a for a in test if a not in owned})
    return out


def evaluate_new_apps(model, train_sequences, splits, mode="ranked", seed=0):
    """Hit rates of embedding predictions and the popularity baseline on the same users.

    Users none of whose training apps made the vocabulary are skipped.
    """
    counts = Counter(a for seq in train_sequences.values() for a in seq.apps)
    emb, pop, held = {}, {}, {}
    skipped = 0
    for user, (train_apps, new_apps) in splits.items():
        if not any(a in model.index for a in train_apps):
            skipped += 1
            continue
        user_seed = None if seed is None else [int(seed), len(emb)]
        emb[user] = embed.predict_new_apps(model, train_apps, mode=mode, seed=user_seed)
        pop[user] = embed.popularity_baseline(counts, train_apps, math.ceil(len(set(train_apps)) / 4))
        held[user] = new_apps
    return {
        "embedding_hit_rate": embed.evaluate_new_app(emb, held),
        "popularity_hit_rate": embed.evaluate_new_app(pop, held),
        "n_users": len(emb),
        "n_skipped": skipped,
    }


def composed_predictions(sequences, examples, nov_model, emb_model, rep_model, popular):
    """Top-1 next-app accuracy of the routed predictor and of repeat-only routing.

    Every example is a test purchase with enough history. The routed
    predictor asks the novelty model first; a predicted re-purchase goes to
    the repeat model, a predicted new app to the embedding (falling back to
    the most popular unowned app when no owned app is in the vocabulary).
    Repeat-only routing sends everything to the repeat model.
    """
    by_user = {}
    for ex in examples:
        by_user.setdefault(ex.user_id, []).append(ex)
    routed_hits = repeat_hits = routed_new = 0
    n = 0
    for user in sorted(by_user):
        entries = sequences[user].entries
        for ex in by_user[user]:
            history = {}
            for app, d, _ in entries:
                if d >= ex.day:
                    break
                history.setdefault(app, []).append(d)
            inst = repeat.RepurchaseInstance(history, None, ex.day, user)
            rep_guess = repeat.predict_repeat(rep_model, inst)
            _, cls = novelty.predict_novelty(nov_model, ex)
            if cls == novelty.REPURCHASE:
                guess = rep_guess
            else:
                routed_new += 1
                try:
                    guess = embed.predict_new_apps(emb_model, list(history), quota=1)[0]
                except (DataError, IndexError):
                    guess = next((a for a in popular if a not in history), None)
            routed_hits += guess == ex.app_id
            repeat_hits += rep_guess == ex.app_id
            n += 1
    if n == 0:
        raise DataError("no test purchases to route")
    return {
        "composed_acc": routed_hits / n,
        "repeat_only_acc": repeat_hits / n,
        "n_events": n,
        "n_routed_new": routed_new,
    }


# ------------------------------------------------------------------ pipeline

STAGE_FILES = ("temporal.csv", "novelty.csv", "embedding.csv", "repeat.csv", "composed.csv")


def run_pipeline(events, profiles, out_dir, split_fraction=0.8, seed=0, embed_config=None, log=None):
    """Run every stage and write per-stage metric files into ``out_dir``.

    Returns a dict of all metrics. Raises the failing stage's error after
    writing whatever earlier stages produced.
    """
    say = log or (lambda msg: None)
    os.makedirs(out_dir, exist_ok=True)
    sequences = ingest.collapse_daily(events, ingest.IN_APP)
    if not sequences:
        raise DataError("no in-app purchases in the log")
    lo, hi = ingest.day_range(sequences)
    split = ingest.split_day(lo, hi, split_fraction)
    if split > hi:
        raise DataError("empty test slice: raise the test share or extend the log")
    train_seqs = ingest.truncate_sequences(sequences, split)
    report = {"split_day": split, "first_day": lo, "last_day": hi}

    say("temporal")
    gaps = temporal.extract_gaps(train_seqs, "day")
    fits = temporal.compare_families(gaps)
    write_csv(
        os.path.join(out_dir, "temporal.csv"),
        ("rank", "family", "params", "loglik", "aic", "n"),
        [
            (k + 1, f.family, ";".join(f"{a}={v!r}" for a, v in f.params.items()), f.loglik, f.aic, f.n)
            for k, f in enumerate(fits)
        ],
    )
    report["temporal_best"] = fits[0].family

    say("novelty")
    examples, _ = novelty.extract_novelty_examples(sequences, profiles)
    train_ex = [e for e in examples if e.day < split]
    test_ex = [e for e in examples if e.day >= split]
    if not train_ex or not test_ex:
        raise DataError("novelty stage needs examples on both sides of the split")
    nov_model = novelty.train_logistic(train_ex, novelty.prune_correlated(train_ex))
    nov = novelty.evaluate_novelty(nov_model, test_ex)
    base = novelty.majority_baseline(train_ex, test_ex)
    write_csv(
        os.path.join(out_dir, "novelty.csv"),
        ("predictor", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"),
        [
            (name, m.accuracy, m.precision, m.recall, m.f1, m.tp, m.fp, m.fn, m.tn)
            for name, m in (("logistic", nov), ("majority", base))
        ],
    )
    nov_model.save(os.path.join(out_dir, "novelty_model.json"))
    report["novelty_acc"], report["novelty_majority_acc"] = nov.accuracy, base.accuracy

    say("embedding")
    cfg = embed_config or embed.TrainConfig(seed=seed)
    emb_model = embed.train_embeddings(app_sequences(train_seqs), cfg)
    emb_model.save(os.path.join(out_dir, "embedding.txt"))
    new_apps = evaluate_new_apps(emb_model, train_seqs, new_app_split(sequences, split), seed=seed)
    write_csv(os.path.join(out_dir, "embedding.csv"), tuple(new_apps), [tuple(new_apps.values())])
    report.update(new_apps)

    say("repeat")
    train_inst = repeat.build_repurchase_instances(train_seqs)
    test_inst = repeat.build_repurchase_instances(sequences, (split, math.inf))
    rep_model = repeat.train_repeat(train_inst)
    rep_model.save(os.path.join(out_dir, "repeat_model.txt"))
    rep = repeat.evaluate_repeat(rep_model, test_inst)
    write_csv(os.path.join(out_dir, "repeat.csv"), ("model_acc", "recent_acc", "frequent_acc", "n"), [tuple(rep)])
    report.update({"repeat_" + k: v for k, v in rep._asdict().items()})

    say("composed")
    counts = Counter(a for seq in train_seqs.values() for a in seq.apps)
    popular = [a for a, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    comp = composed_predictions(sequences, test_ex, nov_model, emb_model, rep_model, popular)
    write_csv(os.path.join(out_dir, "composed.csv"), tuple(comp), [tuple(comp.values())])
    report.update(comp)

    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump({k: _jsonable(v) for k, v in report.items()}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return report


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v

