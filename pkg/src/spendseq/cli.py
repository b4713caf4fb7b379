"""Command line entry point: ``spendseq <command> [options]``.

Every command writes a ``manifest.json`` into its output directory. Exit
codes: 0 success, 1 usage error, 2 data error, 3 convergence error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

from . import analytics, embed, ingest, novelty, pipeline, repeat, synth, temporal
from .errors import ConvergenceError, SpendSeqError

log = logging.getLogger("spendseq")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3

STATS = (
    "gini",
    "lorenz",
    "categories",
    "big-spenders",
    "income",
    "spend-by-group",
    "top-apps",
    "persistence",
    "adoption",
    "abandonment",
    "switching",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ loading

def _load_log(path, span_days=None):
    events, rejected = ingest.read_receipt_log(path, span_days)
    if rejected:
        log.warning("%s: skipped %d malformed lines", path, len(rejected))
    return events


def _load_profiles(path):
    if not path:
        return {}
    profiles, rejected = ingest.read_profiles(path)
    if rejected:
        log.warning("%s: skipped %d malformed profile lines", path, len(rejected))
    return profiles


def _split(sequences, fraction):
    lo, hi = ingest.day_range(sequences)
    return ingest.split_day(lo, hi, fraction)


def _in_app(path, merge="app"):
    return ingest.collapse_daily(_load_log(path), ingest.IN_APP, merge=merge)


def _out(args, name):
    return os.path.join(args.out_dir, name)


# ----------------------------------------------------------------- commands

def cmd_ingest(args):
    with open(args.log, encoding="utf-8", newline="") as fh:
        events, rejected = ingest.parse_receipt_log(fh, args.span_days)
    ingest.write_receipt_log(events, args.out)
    ingest.write_rejects(rejected, args.out + ".rejects.csv")
    print(f"{len(events)} events kept, {len(rejected)} lines rejected")
    if args.profiles:
        profiles, prej = ingest.read_profiles(args.profiles)
        ingest.write_profiles(profiles, args.out + ".profiles.csv")
        ingest.write_rejects(prej, args.out + ".profiles.rejects.csv")
        print(f"{len(profiles)} profiles kept, {len(prej)} lines rejected")


def cmd_stats(args):
    events = _load_log(args.log)
    profiles = _load_profiles(args.profiles)
    spend = analytics.spend_per_user(events)
    which = STATS if args.stat == "all" else (args.stat,)
    seqs = None
    for stat in which:
        path = _out(args, stat.replace("-", "_") + ".csv")
        if stat == "gini":
            pipeline.write_csv(path, ("gini", "n_users"), [(analytics.gini(spend), len(spend))])
        elif stat == "lorenz":
            L = analytics.lorenz(spend)
            pipeline.write_csv(path, ("pop_frac", "spend_frac"), L.points)
        elif stat == "categories":
            rows = analytics.category_summary(events)
            pipeline.write_csv(
                path,
                ("category", "n_users", "n_purchases", "spend_cents", "user_share", "purchase_share", "spend_share"),
                [
                    (r.category, r.n_users, r.n_purchases, r.spend_cents, r.user_share, r.purchase_share, r.spend_share)
                    for r in rows
                ],
            )
        elif stat == "big-spenders":
            rep = analytics.big_spenders(spend, args.top_fraction, profiles)
            rows = [("segment_size", "", rep.segment_size), ("spend_share", "", rep.spend_share)]
            for part, ages in rep.median_age_by_gender.items():
                rows += [(f"median_age.{part}", g, v) for g, v in ages.items()]
            rows += [("gender_share.segment", g, v) for g, v in rep.gender_shares.items()]
            rows += [("gender_share.rest", g, v) for g, v in rep.rest_gender_shares.items()]
            rows += [("country_lift", c, v) for c, v in rep.country_lift.items()]
            pipeline.write_csv(path, ("metric", "key", "value"), rows)
        elif stat == "income":
            rows = analytics.income_fractions(spend, profiles, args.top_fraction, args.min_group)
            pipeline.write_csv(path, ("income_bracket", "n_users", "big_fraction"), rows)
        elif stat == "spend-by-group":
            rows = []
            for key in ("gender", "age", "country", "income_bracket"):
                rows += [(key,) + r for r in analytics.spend_by_group(spend, profiles, key, args.min_group)]
            pipeline.write_csv(path, ("key", "group", "n_users", "median_cents", "mean_cents"), rows)
        elif stat == "top-apps":
            rows = analytics.top_apps(events, profiles, args.k)
            pipeline.write_csv(path, ("app_id", "earnings_cents", "n_purchases", "mean_age", "women_share"), rows)
        elif stat == "persistence":
            frac = analytics.monthly_top_persistence(events, args.month_days, args.top_fraction)
            pipeline.write_csv(path, ("fraction_top_in_at_most_half_of_months",), [(frac,)])
        else:
            if seqs is None:
                seqs = ingest.collapse_daily(events, ingest.IN_APP)
            if stat == "switching":
                rows = analytics.switching_lift(seqs, margin_days=args.margin_days)
                pipeline.write_csv(
                    path,
                    ("threshold", "n_pairs", "switch_rate", "base_rate", "lift"),
                    [(r.threshold, r.n_pairs, r.switch_rate, r.base_rate, "" if r.lift is None else r.lift) for r in rows],
                )
            else:
                pairs = ingest.select_frequent_pairs(seqs, args.min_purchases, margin_days=args.margin_days)
                fn = analytics.adoption_curves if stat == "adoption" else analytics.abandonment_curves
                c = fn(pairs)
                pipeline.write_csv(
                    path,
                    ("position", "delay_mean", "delay_median", "spend_mean", "spend_median", "n_pairs"),
                    [
                        (int(p), c.delay_mean[i], c.delay_median[i], c.spend_mean[i], c.spend_median[i], c.n_pairs)
                        for i, p in enumerate(c.positions)
                    ],
                )
        print(f"wrote {path}")


def cmd_fit_temporal(args):
    seqs = _in_app(args.log)
    gaps = temporal.extract_gaps(seqs, args.merge)
    families = temporal.FAMILIES if args.family == "all" else (args.family,)
    fits = temporal.compare_families(gaps, families)
    pipeline.write_csv(
        _out(args, "fits.csv"),
        ("family", "params", "loglik", "aic", "n", "error"),
        [
            (f.family, ";".join(f"{k}={v!r}" for k, v in f.params.items()), f.loglik, f.aic, f.n, f.error or "")
            for f in fits
        ],
    )
    for f in fits:
        if not f.converged:
            continue
        qq, pp = temporal.qq_pp_points(gaps, f, args.max_points)
        pipeline.write_csv(_out(args, f"qq_{f.family}.csv"), ("empirical_q", "theoretical_q"), qq.tolist())
        pipeline.write_csv(_out(args, f"pp_{f.family}.csv"), ("empirical_p", "theoretical_p"), pp.tolist())
    for rank, f in enumerate(fits, 1):
        print(f"{rank}. {f.family:14s} aic={f.aic:.4f} " + " ".join(f"{k}={v:.6g}" for k, v in f.params.items()))


def _novelty_examples(args):
    seqs = _in_app(args.log)
    profiles = _load_profiles(args.profiles)
    examples, skipped = novelty.extract_novelty_examples(seqs, profiles)
    if skipped:
        log.warning("%d purchases skipped for missing profile fields", skipped)
    return examples, _split(seqs, args.split_fraction)


def cmd_train_novelty(args):
    examples, split = _novelty_examples(args)
    train = [e for e in examples if e.day < split]
    kept = novelty.prune_correlated(train, args.corr_threshold)
    model = novelty.train_logistic(train, kept, l2=args.l2)
    model.save(args.out)
    w, b = model.raw_coefficients()
    for name, v in zip(model.kept_names, w):
        print(f"{name:30s} {v: .6g}")
    print(f"{'intercept':30s} {b: .6g}")


def cmd_eval_novelty(args):
    examples, split = _novelty_examples(args)
    model = novelty.NoveltyModel.load(args.model)
    train = [e for e in examples if e.day < split]
    test = [e for e in examples if e.day >= split]
    m = novelty.evaluate_novelty(model, test)
    rows = [("logistic", m)]
    if train:
        rows.append(("majority", novelty.majority_baseline(train, test)))
    pipeline.write_csv(
        _out(args, "novelty_metrics.csv"),
        ("predictor", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"),
        [(n, r.accuracy, r.precision, r.recall, r.f1, r.tp, r.fp, r.fn, r.tn) for n, r in rows],
    )
    for n, r in rows:
        print(f"{n:9s} accuracy={r.accuracy:.4f} precision={r.precision:.4f} recall={r.recall:.4f} f1={r.f1:.4f}")


def cmd_train_embed(args):
    seqs = _in_app(args.log)
    train = ingest.truncate_sequences(seqs, _split(seqs, args.split_fraction)) if args.split_fraction < 1 else seqs
    cfg = embed.TrainConfig(
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        min_count=args.min_count,
        seed=args.seed,
    )
    model = embed.train_embeddings(pipeline.app_sequences(train), cfg)
    model.save(args.out)
    print(f"{len(model.vocab)} apps embedded in {model.dim} dimensions")


def cmd_neighbors(args):
    model = embed.EmbeddingModel.load(args.model)
    rows = embed.nearest(model, args.app, args.k)
    pipeline.write_csv(_out(args, "neighbors.csv"), ("app_id", "cosine"), rows)
    for app, c in rows:
        print(f"{app}\t{c:.6f}")


def cmd_predict_new(args):
    model = embed.EmbeddingModel.load(args.model)
    seqs = _in_app(args.log)
    split = _split(seqs, args.split_fraction)
    train = ingest.truncate_sequences(seqs, split)
    splits = pipeline.new_app_split(seqs, split)
    rows = []
    for k, (user, (apps, _)) in enumerate(splits.items()):
        if not any(a in model.index for a in apps):
            continue
        preds = embed.predict_new_apps(model, apps, mode=args.mode, seed=[args.seed, k])
        rows += [(user, r + 1, a) for r, a in enumerate(preds)]
    pipeline.write_csv(_out(args, "predictions.csv"), ("user_id", "rank", "app_id"), rows)
    rates = pipeline.evaluate_new_apps(model, train, splits, mode=args.mode, seed=args.seed)
    pipeline.write_csv(_out(args, "new_app_hit_rates.csv"), tuple(rates), [tuple(rates.values())])
    print(f"embedding hit rate {rates['embedding_hit_rate']:.4f}, popularity {rates['popularity_hit_rate']:.4f}")


def cmd_train_repeat(args):
    seqs = _in_app(args.log)
    train = ingest.truncate_sequences(seqs, _split(seqs, args.split_fraction)) if args.split_fraction < 1 else seqs
    model = repeat.train_repeat(repeat.build_repurchase_instances(train), max_outer=args.max_outer)
    model.save(args.out)
    print("s:", " ".join(f"{v:.4g}" for v in model.s_weights))
    print("T:", " ".join(f"{v:.4g}" for v in model.t_weights))


def cmd_eval_repeat(args):
    model = repeat.RepeatModel.load(args.model)
    seqs = _in_app(args.log)
    test = repeat.build_repurchase_instances(seqs, (_split(seqs, args.split_fraction), math.inf))
    m = repeat.evaluate_repeat(model, test)
    pipeline.write_csv(_out(args, "repeat_eval.csv"), ("model_acc", "recent_acc", "frequent_acc", "n"), [tuple(m)])
    print(f"model {m.model_acc:.4f}  most-recent {m.recent_acc:.4f}  most-frequent {m.frequent_acc:.4f}  n={m.n}")


def _synth_config(args):
    if args.config:
        cfg = synth.SynthConfig.load(args.config)
    else:
        cfg = synth.PRESETS[args.preset]()
    if args.n_users is not None:
        cfg = cfg.replace(n_users=args.n_users)
    if args.seed_given:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write_synth(cfg, out_dir):
    events, profiles, truth = synth.generate(cfg)
    ingest.write_receipt_log(events, os.path.join(out_dir, "events.csv"))
    ingest.write_profiles(profiles, os.path.join(out_dir, "profiles.csv"))
    cfg.save(os.path.join(out_dir, "config.txt"))
    truth.save(os.path.join(out_dir, "ground_truth.json"))
    return events, profiles


def cmd_synth(args):
    cfg = _synth_config(args)
    events, profiles = _write_synth(cfg, args.out_dir)
    print(f"{len(events)} events for {len(profiles)} users written to {args.out_dir}")
    args.config_text = cfg.to_text()


def cmd_pipeline(args):
    if args.log:
        events = _load_log(args.log)
        profiles = _load_profiles(args.profiles)
    else:
        cfg = _synth_config(args)
        events, profiles = _write_synth(cfg, args.out_dir)
        args.config_text = cfg.to_text()
    report = pipeline.run_pipeline(
        events, profiles, args.out_dir, args.split_fraction, seed=args.seed, log=lambda s: log.info("stage %s", s)
    )
    for key in ("novelty_acc", "novelty_majority_acc", "embedding_hit_rate", "popularity_hit_rate",
                "repeat_model_acc", "repeat_recent_acc", "repeat_frequent_acc", "composed_acc", "repeat_only_acc"):
        print(f"{key:22s} {report[key]:.4f}")


# ------------------------------------------------------------------- parser

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out-dir", default=None, help="directory for outputs and the run manifest")
    common.add_argument("-q", "--quiet", action="store_true")

    p = _Parser(prog="spendseq", description="Purchase-log analytics and next-purchase models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(func=fn)
        return sp

    sp = add("ingest", cmd_ingest, "validate a receipt log and write clean copies")
    sp.add_argument("--log", required=True)
    sp.add_argument("--profiles")
    sp.add_argument("--out", required=True)
    sp.add_argument("--span-days", type=int)

    sp = add("stats", cmd_stats, "descriptive analytics, one CSV per statistic")
    sp.add_argument("stat", choices=STATS + ("all",))
    sp.add_argument("--log", required=True)
    sp.add_argument("--profiles")
    sp.add_argument("--top-fraction", type=float, default=0.01)
    sp.add_argument("--min-group", type=int, default=100)
    sp.add_argument("--min-purchases", type=int, default=50)
    sp.add_argument("--margin-days", type=int, default=30)
    sp.add_argument("--month-days", type=int, default=30)
    sp.add_argument("--k", type=int, default=10)

    sp = add("fit-temporal", cmd_fit_temporal, "fit inter-purchase time families and rank by AIC")
    sp.add_argument("--log", required=True)
    sp.add_argument("--family", default="all", choices=temporal.FAMILIES + ("all",))
    sp.add_argument("--merge", default="day", choices=("day", "app"))
    sp.add_argument("--max-points", type=int, default=1000)

    for name, fn, text in (
        ("train-novelty", cmd_train_novelty, "train the new-vs-existing app classifier"),
        ("eval-novelty", cmd_eval_novelty, "evaluate the classifier on the test slice"),
    ):
        sp = add(name, fn, text)
        sp.add_argument("--log", required=True)
        sp.add_argument("--profiles", required=True)
        sp.add_argument("--split-fraction", type=float, default=0.8)
        if name == "train-novelty":
            sp.add_argument("--out", required=True)
            sp.add_argument("--l2", type=float, default=1e-4)
            sp.add_argument("--corr-threshold", type=float, default=0.7)
        else:
            sp.add_argument("--model", required=True)

    sp = add("train-embed", cmd_train_embed, "learn app embeddings from purchase sequences")
    sp.add_argument("--log", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split-fraction", type=float, default=0.8)
    d = embed.TrainConfig()
    for flag, val in (("dim", d.dim), ("window", d.window), ("negatives", d.negatives),
                      ("epochs", d.epochs), ("min-count", d.min_count)):
        sp.add_argument(f"--{flag}", type=int, default=val)

    sp = add("neighbors", cmd_neighbors, "most similar apps by cosine")
    sp.add_argument("--model", required=True)
    sp.add_argument("--app", required=True)
    sp.add_argument("--k", type=int, default=5)

    sp = add("predict-new", cmd_predict_new, "predict new apps per user and score against the test slice")
    sp.add_argument("--model", required=True)
    sp.add_argument("--log", required=True)
    sp.add_argument("--mode", choices=("ranked", "random"), default="ranked")
    sp.add_argument("--split-fraction", type=float, default=0.8)

    sp = add("train-repeat", cmd_train_repeat, "train the recency/frequency repeat model")
    sp.add_argument("--log", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split-fraction", type=float, default=0.8)
    sp.add_argument("--max-outer", type=int, default=50)

    sp = add("eval-repeat", cmd_eval_repeat, "repeat model and baseline accuracies on the test slice")
    sp.add_argument("--model", required=True)
    sp.add_argument("--log", required=True)
    sp.add_argument("--split-fraction", type=float, default=0.8)

    for name, fn, text in (
        ("synth", cmd_synth, "generate a synthetic log with ground truth"),
        ("pipeline", cmd_pipeline, "run every stage on a log, or on a synthetic preset"),
    ):
        sp = add(name, fn, text)
        sp.add_argument("--config")
        sp.add_argument("--preset", choices=sorted(synth.PRESETS), default="paper")
        sp.add_argument("--n-users", type=int)
        if name == "pipeline":
            sp.add_argument("--log")
            sp.add_argument("--profiles")
            sp.add_argument("--split-fraction", type=float, default=0.8)
    return p


def _default_out_dir(args):
    out = getattr(args, "out", None)
    if out:
        return os.path.dirname(os.path.abspath(out))
    return os.getcwd()


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.threads < 1:
        print("spendseq: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.out_dir is None:
        args.out_dir = _default_out_dir(args)
    os.makedirs(args.out_dir, exist_ok=True)
    args.config_text = ""
    started = time.time()
    status, code = "ok", EXIT_OK
    inputs = [getattr(args, k, None) for k in ("log", "profiles", "model", "config")]
    try:
        args.func(args)
    except ConvergenceError as exc:
        status, code = f"convergence error: {exc}", EXIT_CONVERGENCE
    except (SpendSeqError, ValueError, KeyError, OSError) as exc:
        status, code = f"data error: {exc}", EXIT_DATA
    if code != EXIT_OK:
        print(f"spendseq {args.command}: {status}", file=sys.stderr)
    if not args.config_text and getattr(args, "config", None) and os.path.exists(args.config):
        with open(args.config, encoding="utf-8") as fh:
            args.config_text = fh.read()
    pipeline.write_manifest(
        args.out_dir,
        ["spendseq"] + argv,
        args.seed,
        inputs=[p for p in inputs if p],
        config_text=args.config_text,
        started=started,
        status=status,
        extra={"threads": args.threads},
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
