import csv
import json

import numpy as np
import pytest

from fundusrank.cli import main, parse_ks
from fundusrank.errors import UsageError
from fundusrank.ranking import fscore_scores, read_ranking
from fundusrank.synth import generate_table
from fundusrank.table import read_table
from conftest import make_fundus_dataset


def run(*argv):
    return main([str(a) for a in argv])


# --- synthetic generator -----------------------------------------------------

def test_synth_contract_and_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("synth", "--n", 5000, "--informative", 10, "--noise", 40, "--seed", 7, "--out", a) == 0
    assert run("synth", "--n", 5000, "--informative", 10, "--noise", 40, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()
    t = read_table(a)
    assert (t.n, t.L) == (5000, 50) and set(t.classes) == {0, 1}
    side = json.loads(a.with_suffix(".json").read_text())
    assert len(side["informative"]) == 10
    assert all(t.feature_names[i].startswith("informative") for i in side["informative"])


def test_generator_informative_fscores_dominate():
    hits = 0
    for seed in range(100):
        table, informative = generate_table(1000, 10, 40, effect=1.5, seed=seed)
        f = fscore_scores(table.values, table.labels)
        noise = np.setdiff1d(np.arange(50), informative)
        hits += f[informative].min() > f[noise].max()
    assert hits >= 95


def test_generator_multiclass_and_errors():
    table, informative = generate_table(600, 3, 2, n_classes=6, seed=1)
    assert set(table.classes) == set(range(6)) and len(informative) == 3
    with pytest.raises(ValueError):
        generate_table(10, 1, 1, n_classes=1)


# --- argument parsing ----------------------------------------------------------

def test_parse_ks():
    assert parse_ks(None, 4) == [1, 2, 3, 4]
    assert parse_ks("1:66", 66) == list(range(1, 67))
    assert parse_ks("1:98:5", 98)[:3] == [1, 6, 11]
    assert parse_ks("10,20,40", 66) == [10, 20, 40]
    for bad in ("0:5", "1:100", "x", "1:5:0"):
        with pytest.raises(UsageError):
            parse_ks(bad, 66)


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("rank", "t.csv", "--method", "FSCORE")  # --seed is mandatory
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1
    assert run("rank", tmp_path / "missing.csv", "--method", "FSCORE", "--seed", 1) == 2
    assert "not found" in capsys.readouterr().err
    run("synth", "--n", 200, "--informative", 2, "--noise", 2, "--seed", 1, "--out", tmp_path / "t.csv")
    assert run("report", tmp_path / "t.csv", "-k", 99, "--seed", 1) == 1
    assert run("synth", "--n", 0, "--seed", 1, "--output-dir", tmp_path) == 1


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FUNDUSRANK_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("synth", "--n", 50, "--informative", 1, "--noise", 1, "--seed", 2) == 0
    assert (tmp_path / "env" / "synthetic.csv").is_file()
    assert run("synth", "--n", 50, "--informative", 1, "--noise", 1, "--seed", 2,
               "--output-dir", tmp_path / "flag") == 0
    assert (tmp_path / "flag" / "synthetic.csv").is_file()


# --- ingest ----------------------------------------------------------------------

def test_ingest_region66(tmp_path, capsys):
    cfg = make_fundus_dataset(tmp_path / "d", "diaretdb1", n_images=2)
    out = tmp_path / "f.csv"
    assert run("ingest", cfg, "--out", out, "--region-dump", tmp_path / "dump") == 0
    t = read_table(out)
    assert t.L == 66 and set(t.classes) <= set(range(6))
    assert len(list((tmp_path / "dump").glob("*.regions.csv"))) == 2
    shown = capsys.readouterr().out
    assert "x 66 features" in shown and "hard_exudate" in shown
    again = tmp_path / "g.csv"
    run("ingest", cfg, "--out", again)
    assert out.read_bytes() == again.read_bytes()


def test_ingest_full98(tmp_path):
    cfg = make_fundus_dataset(tmp_path / "s", "stare", n_images=2)
    assert run("ingest", cfg, "--out", tmp_path / "s.csv") == 0
    t = read_table(tmp_path / "s.csv")
    assert t.L == 98 and set(t.classes) == {0, 1}


def test_ingest_empty_dataset(tmp_path, capsys):
    (tmp_path / "images").mkdir()
    cfg = tmp_path / "c.cfg"
    cfg.write_text("images_dir = images\nclasses = non_vessel, vessel\nprofile = FULL98\n")
    with pytest.warns(UserWarning):
        assert run("ingest", cfg, "--output-dir", tmp_path) == 2
    assert "no samples" in capsys.readouterr().err


def test_ingest_rejects_bad_config(tmp_path):
    cfg = make_fundus_dataset(tmp_path / "d", "diaretdb1", n_images=1, extra="candiate_k = 3")
    assert run("ingest", cfg, "--output-dir", tmp_path) == 2
    cfg = make_fundus_dataset(tmp_path / "e", "stare", n_images=1)
    assert run("ingest", cfg, "--profile", "REGION66", "--output-dir", tmp_path) == 2


# --- rank / sweep / report -----------------------------------------------------------

@pytest.fixture
def synth_table(tmp_path):
    path = tmp_path / "syn.csv"
    run("synth", "--n", 1500, "--informative", 4, "--noise", 8, "--effect", 1.0, "--seed", 3, "--out", path)
    return path


def test_rank_sweep_pipeline(tmp_path, synth_table):
    out = tmp_path / "out"
    assert run("rank", synth_table, "--method", "MRMR", "--seed", 5, "--param", "n_trees=20",
               "--output-dir", out) == 0
    ranking = out / "ranking_mrmr.csv"
    first = ranking.read_bytes()
    assert run("rank", synth_table, "--method", "MRMR", "--seed", 5, "--param", "n_trees=20",
               "--output-dir", out) == 0
    assert ranking.read_bytes() == first
    res, names = read_ranking(ranking)
    side = json.loads(synth_table.with_suffix(".json").read_text())
    assert set(res.top(4).tolist()) == set(side["informative"])
    log = json.loads(ranking.with_suffix(".json").read_text())
    assert len(log["fold_validation_error"]) == 5

    assert run("sweep", synth_table, ranking, "--ks", "1:12:2", "--seed", 5, "--classifier", "knn",
               "--output-dir", out) == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["k"]) for r in rows] == [1, 3, 5, 7, 9, 11]
    assert all(r["method"] == "MRMR" and r["classifier"] == "KNN" for r in rows)
    assert (out / "accuracy.svg").read_text().startswith("<svg")
    assert (out / "roc.svg").is_file() and (out / "roc_k001.csv").is_file()


def test_sweep_rejects_mismatched_ranking(tmp_path, synth_table):
    other = tmp_path / "other.csv"
    run("synth", "--n", 300, "--informative", 2, "--noise", 2, "--seed", 3, "--out", other)
    run("rank", other, "--method", "FSCORE", "--seed", 1, "--classifier", "KNN", "--out", tmp_path / "r.csv")
    assert run("sweep", synth_table, tmp_path / "r.csv", "--seed", 1, "--output-dir", tmp_path) == 2


def test_rank_auto_classifier(tmp_path, synth_table, capsys):
    assert run("rank", synth_table, "--method", "FSCORE", "--seed", 2, "--classifier", "auto",
               "--param", "n_trees=10", "--output-dir", tmp_path) == 0
    assert "selected classifier" in capsys.readouterr().out


def test_report_with_subtask(tmp_path):
    table_path = tmp_path / "m.csv"
    run("synth", "--n", 1800, "--informative", 4, "--noise", 4, "--classes", 3, "--seed", 4, "--out", table_path)
    out = tmp_path / "rep"
    assert run("report", table_path, "--methods", "fscore,mrmr", "-k", 4, "--seed", 1,
               "--param", "n_trees=15", "--subtask", "1,2", "--output-dir", out) == 0
    lines = (out / "comparison.csv").read_text().splitlines()
    assert lines[0].startswith("method,k,accuracy,wall_time_s,accuracy_all")
    assert [l.split(",")[0] for l in lines[1:]] == ["FSCORE", "MRMR"]
    assert (out / "roc_1v2_top4.csv").is_file() and (out / "roc.svg").is_file()
    assert run("report", table_path, "--methods", "relief", "--seed", 1, "--output-dir", out) == 1
    assert run("report", table_path, "--subtask", "1,7", "-k", 4, "--seed", 1, "--output-dir", out) == 2
