import csv
import json
import os

import numpy as np
import pytest

from spendseq import analytics, cli, embed, ingest, novelty, pipeline, repeat, synth
from spendseq.errors import DataError


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert cli.main(["synth", "--preset", "paper", "--n-users", "1500", "--seed", "3", "--out-dir", str(d), "-q"]) == 0
    return d


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest(d):
    with open(os.path.join(d, "manifest.json")) as fh:
        return json.load(fh)


def test_synth_outputs(synth_dir):
    assert {"events.csv", "profiles.csv", "config.txt", "ground_truth.json", "manifest.json"} <= set(os.listdir(synth_dir))
    m = _manifest(synth_dir)
    assert m["seed"] == 3 and m["status"] == "ok"
    cfg = synth.SynthConfig.load(synth_dir / "config.txt")
    assert cfg.seed == 3 and cfg.n_users == 1500
    assert m["config_digest"] == pipeline.text_digest(cfg.to_text())


def test_synth_from_config_file(synth_dir, tmp_path):
    out = tmp_path / "again"
    assert cli.main(["synth", "--config", str(synth_dir / "config.txt"), "--out-dir", str(out), "-q"]) == 0
    assert (out / "events.csv").read_bytes() == (synth_dir / "events.csv").read_bytes()
    m = _manifest(out)
    assert m["inputs"][str(synth_dir / "config.txt")] == pipeline.file_digest(synth_dir / "config.txt")


def test_ingest_command(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("user_id,app_id,category,day,amount_cents\nu1,a9,InApp,37,499\nu1,a9,Snack,37,499\nu2,a1,Song,3,129\n")
    out = tmp_path / "clean" / "log.csv"
    assert cli.main(["ingest", "--log", str(log), "--out", str(out), "-q"]) == 0
    events, rejected = ingest.read_receipt_log(out)
    assert len(events) == 2 and not rejected
    rej = _rows(str(out) + ".rejects.csv")
    assert [(r["line_no"], r["reason"]) for r in rej] == [("3", "unknown-category")]
    assert os.path.exists(tmp_path / "clean" / "manifest.json")


def test_stats_all(synth_dir, tmp_path):
    args = ["stats", "all", "--log", str(synth_dir / "events.csv"), "--profiles", str(synth_dir / "profiles.csv")]
    assert cli.main(args + ["--out-dir", str(tmp_path), "--min-purchases", "20", "-q"]) == 0
    for stat in cli.STATS:
        assert (tmp_path / (stat.replace("-", "_") + ".csv")).exists(), stat
    lorenz = _rows(tmp_path / "lorenz.csv")
    assert list(lorenz[0]) == ["pop_frac", "spend_frac"]
    assert float(lorenz[0]["pop_frac"]) == 0.0 and float(lorenz[-1]["spend_frac"]) == 1.0
    (g,) = _rows(tmp_path / "gini.csv")
    events, _ = ingest.read_receipt_log(synth_dir / "events.csv")
    assert float(g["gini"]) == analytics.gini(analytics.spend_per_user(events))


def test_fit_temporal(synth_dir, tmp_path):
    assert cli.main(["fit-temporal", "--log", str(synth_dir / "events.csv"), "--out-dir", str(tmp_path), "-q"]) == 0
    fits = _rows(tmp_path / "fits.csv")
    assert {r["family"] for r in fits} == set(cli.temporal.FAMILIES)
    aics = [float(r["aic"]) for r in fits]
    assert aics == sorted(aics)
    assert (tmp_path / f"qq_{fits[0]['family']}.csv").exists() and (tmp_path / f"pp_{fits[0]['family']}.csv").exists()


def test_model_commands(synth_dir, tmp_path):
    log, prof = str(synth_dir / "events.csv"), str(synth_dir / "profiles.csv")
    nov = str(tmp_path / "novelty.json")
    assert cli.main(["train-novelty", "--log", log, "--profiles", prof, "--out", nov, "-q"]) == 0
    assert isinstance(novelty.NoveltyModel.load(nov), novelty.NoveltyModel)
    assert cli.main(["eval-novelty", "--log", log, "--profiles", prof, "--model", nov, "--out-dir", str(tmp_path / "ev"), "-q"]) == 0

    emb = str(tmp_path / "emb.txt")
    assert cli.main(["train-embed", "--log", log, "--out", emb, "--dim", "16", "--epochs", "2", "-q"]) == 0
    model = embed.EmbeddingModel.load(emb)
    app = model.vocab[0]
    nb = tmp_path / "nb"
    assert cli.main(["neighbors", "--model", emb, "--app", app, "--k", "3", "--out-dir", str(nb), "-q"]) == 0
    assert cli.main(["neighbors", "--model", emb, "--app", "no-such-app", "--out-dir", str(nb), "-q"]) == 2
    assert cli.main(["predict-new", "--model", emb, "--log", log, "--out-dir", str(tmp_path / "pn"), "-q"]) == 0

    rep = str(tmp_path / "rep.txt")
    assert cli.main(["train-repeat", "--log", log, "--out", rep, "-q"]) == 0
    assert isinstance(repeat.RepeatModel.load(rep), repeat.RepeatModel)
    er = tmp_path / "er"
    assert cli.main(["eval-repeat", "--model", rep, "--log", log, "--out-dir", str(er), "-q"]) == 0
    (row,) = _rows(er / "repeat_eval.csv")
    assert set(row) == {"model_acc", "recent_acc", "frequent_acc", "n"}


def test_exit_codes(synth_dir, tmp_path):
    log = str(synth_dir / "events.csv")
    assert cli.main(["no-such-command"]) == 1
    assert cli.main(["stats", "gini"]) == 1
    assert cli.main(["stats", "gini", "--log", str(tmp_path / "missing.csv"), "--out-dir", str(tmp_path / "a")]) == 2
    assert _manifest(tmp_path / "a")["status"].startswith("data error")
    code = cli.main(["train-repeat", "--log", log, "--out", str(tmp_path / "b" / "r.txt"), "--max-outer", "1", "-q"])
    assert code == 3
    assert _manifest(tmp_path / "b")["status"].startswith("convergence error")


def test_pipeline_split_one_is_error(synth_dir, tmp_path):
    args = ["pipeline", "--log", str(synth_dir / "events.csv"), "--profiles", str(synth_dir / "profiles.csv")]
    assert cli.main(args + ["--split-fraction", "1.0", "--out-dir", str(tmp_path), "-q"]) == 2
    assert (tmp_path / "manifest.json").exists()


def test_pipeline_outputs_and_reruns(synth_dir, tmp_path):
    args = ["pipeline", "--log", str(synth_dir / "events.csv"), "--profiles", str(synth_dir / "profiles.csv"), "--seed", "4", "-q"]
    for k in (1, 2):
        assert cli.main(args + ["--out-dir", str(tmp_path / str(k))]) == 0
    files = set(pipeline.STAGE_FILES) | {"metrics.json", "manifest.json", "embedding.txt", "repeat_model.txt", "novelty_model.json"}
    assert files <= set(os.listdir(tmp_path / "1"))
    assert [f for f in os.listdir(tmp_path / "1") if f == "manifest.json"] == ["manifest.json"]
    for f in pipeline.STAGE_FILES + ("metrics.json", "embedding.txt", "repeat_model.txt", "novelty_model.json"):
        assert (tmp_path / "1" / f).read_bytes() == (tmp_path / "2" / f).read_bytes(), f
    m = _manifest(tmp_path / "1")
    assert m["seed"] == 4 and set(m["inputs"]) == {str(synth_dir / "events.csv"), str(synth_dir / "profiles.csv")}
    for key in ("command", "config_digest", "version", "duration_s"):
        assert key in m


def test_partial_outputs_preserved(tmp_path):
    # no profiles, so the novelty stage has no examples; the temporal stage ran first
    rng = np.random.default_rng(0)
    events = []
    for u in range(12):
        day = 0
        for _ in range(15):
            day += int(rng.integers(1, 9))
            events.append(ingest.PurchaseEvent(f"u{u}", f"a{int(rng.integers(3))}", "InApp", day, 100))
    with pytest.raises(DataError):
        pipeline.run_pipeline(events, {}, str(tmp_path))
    assert (tmp_path / "temporal.csv").exists()
    assert not (tmp_path / "novelty.csv").exists()


def test_composed_not_worse_on_repeat_heavy(tmp_path):
    cfg = synth.repeat_heavy_preset().replace(n_users=1500)
    events, profiles, _ = synth.generate(cfg)
    report = pipeline.run_pipeline(events, profiles, str(tmp_path), seed=0)
    assert report["composed_acc"] >= report["repeat_only_acc"]
    assert report["n_events"] > 500
