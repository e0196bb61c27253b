import json

import pytest

from disfl_selftrain.cli import main
from disfl_selftrain.corpus import read_judged, read_plain, read_tagged


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["--seed", "3", "synth", "--count", "1500", "--output", str(d / "news.txt")]) == 0
    assert main(["--seed", "3", "synth", "--register", "speech", "--disfluent", "--count", "300",
                 "--output", str(d / "pool.txt"), "--gold", str(d / "pool.tsv")]) == 0
    assert main(["--seed", "4", "synth", "--register", "speech", "--disfluent", "--count", "150",
                 "--output", str(d / "dev.txt"), "--gold", str(d / "dev.tsv")]) == 0
    return d


def test_gen_pseudo_disfluency(capsys, data, tmp_path):
    code, out, err = run(capsys, "--seed", 7, "gen-pseudo", "disfluency", "--fluent", data / "news.txt",
                         "--count", 1000, "--output", tmp_path / "p.tsv")
    assert code == 0
    summary = json.loads(out)
    assert summary["sentences"] == 1000
    assert 0 < summary["d_token_rate"] < 0.8
    assert json.loads((tmp_path / "p.tsv.summary.json").read_text()) == summary
    assert len(list(read_tagged(tmp_path / "p.tsv"))) == 1000
    assert "D-token rate" in err


def test_gen_pseudo_judge_error_rate(capsys, data, tmp_path):
    code, out, _ = run(capsys, "gen-pseudo", "judge", "--fluent", data / "news.txt",
                       "--error-fraction", 0.5, "--output", tmp_path / "j.tsv")
    assert code == 0
    rate = json.loads(out)["error_rate"]
    assert abs(rate - 0.5) < 0.05
    assert len(list(read_judged(tmp_path / "j.tsv"))) == 1500


def test_missing_fluent_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "gen-pseudo", "disfluency", "--output", tmp_path / "x.tsv")
    assert code == 2 and "--fluent" in err
    code, _, _ = run(capsys, "gen-pseudo", "disfluency", "--fluent", tmp_path / "nope.txt",
                     "--output", tmp_path / "x.tsv")
    assert code == 2
    code, _, _ = run(capsys, "no-such-command")
    assert code == 2
    code, _, _ = run(capsys)
    assert code == 2


def test_train_infer_evaluate(capsys, data, tmp_path):
    run(capsys, "gen-pseudo", "disfluency", "--fluent", data / "news.txt", "--output", tmp_path / "p.tsv")
    code, out, err = run(capsys, "train", "teacher", "--corpus", tmp_path / "p.tsv",
                         "--output", tmp_path / "t.bin", "--epochs", 2)
    assert code == 0 and "held-out" in err
    assert json.loads(out)["heldout"]["f1"] > 0.5

    code, out, _ = run(capsys, "infer", "--model", tmp_path / "t.bin", "--input", data / "dev.txt",
                       "--output", tmp_path / "pred.tsv", "--cleaned", tmp_path / "clean.txt")
    assert code == 0
    pred = list(read_tagged(tmp_path / "pred.tsv"))
    clean = list(read_plain(tmp_path / "clean.txt"))
    assert len(pred) == 150
    kept = [p for p in pred if "O" in p.labels]
    assert [c.tokens for c in clean] == [tuple(t for t, l in zip(p.tokens, p.labels) if l == "O") for p in kept]

    code, out, err = run(capsys, "evaluate", "--gold", data / "dev.tsv", "--pred", tmp_path / "pred.tsv",
                         "--by-category", "--output", tmp_path / "rep.json")
    assert code == 0
    rep = json.loads(out)
    assert set(rep["categories"]) == {"repetition", "non_repetition"}
    assert rep["percent"]["f1"] == round(100 * rep["f1"], 1)
    assert json.loads((tmp_path / "rep.json").read_text()) == rep

    code, out, _ = run(capsys, "evaluate", "--gold", data / "dev.tsv", "--pred", data / "dev.tsv")
    assert code == 0 and json.loads(out)["f1"] == 1.0


def test_evaluate_mismatch_names_sentence(capsys, data):
    code, _, err = run(capsys, "evaluate", "--gold", data / "dev.tsv", "--pred", data / "pool.tsv")
    assert code == 1 and "sentence" in err


def test_invalid_corpus_fails(capsys, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tQ\n\n", encoding="utf-8")
    code, _, err = run(capsys, "train", "teacher", "--corpus", bad, "--output", tmp_path / "t.bin")
    assert code == 1 and "label" in err
    single = tmp_path / "single.tsv"
    single.write_text("right\ta b\nright\tc d\n", encoding="utf-8")
    code, _, _ = run(capsys, "train", "judge", "--corpus", single, "--output", tmp_path / "j.bin")
    assert code == 1


def test_selftrain_and_no_select(capsys, data, tmp_path):
    common = ["--fluent", data / "news.txt", "--pool", data / "pool.txt", "--pool-gold", data / "pool.tsv",
              "--dev", data / "dev.tsv", "--pseudo-count", 1500, "--judge-count", 1500,
              "--iterations-max", 2, "--epochs", 2, "--pool-schedule", "40,80"]
    code, out, err = run(capsys, "selftrain", *common, "--output-dir", tmp_path / "sel")
    assert code == 0
    s = json.loads(out)
    assert [r["L_t"] for r in s["records"][1:]] == [40, 80]
    assert "best iteration" in err
    assert (tmp_path / "sel" / s["best_checkpoint"]).is_file()
    code, out, _ = run(capsys, "selftrain", *common, "--no-select", "--output-dir", tmp_path / "nosel")
    assert code == 0
    assert all(r["J_t"] == r["L_t"] for r in json.loads(out)["records"])


def test_pseudo_size_sweep(capsys, data, tmp_path):
    code, out, _ = run(capsys, "selftrain", "--fluent", data / "news.txt", "--dev", data / "dev.tsv",
                       "--pseudo-size", "250,500,1000", "--epochs", 2, "--output-dir", tmp_path / "sw")
    assert code == 0
    recs = json.loads(out)["records"]
    assert [r["pseudo_size"] for r in recs] == [250, 500, 1000]
    assert all("f1" in r for r in recs)
    assert len((tmp_path / "sw" / "sweep.jsonl").read_text().splitlines()) == 3


def test_config_file_and_precedence(capsys, data, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"fluent: {data / 'news.txt'}\ncount: 100\nseed: 5\n", encoding="utf-8")
    code, out, _ = run(capsys, "--config", cfg, "gen-pseudo", "disfluency", "--output", tmp_path / "a.tsv")
    assert code == 0 and json.loads(out)["sentences"] == 100
    code, out, _ = run(capsys, "--config", cfg, "gen-pseudo", "disfluency", "--count", 50,
                       "--output", tmp_path / "b.tsv")
    assert json.loads(out)["sentences"] == 50
    # seed from the file: same as passing --seed 5
    run(capsys, "--seed", 5, "gen-pseudo", "disfluency", "--fluent", data / "news.txt", "--count", 100,
        "--output", tmp_path / "c.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "c.tsv").read_bytes()
    jcfg = tmp_path / "cfg.json"
    jcfg.write_text(json.dumps({"bogus-option": 1}), encoding="utf-8")
    code, _, err = run(capsys, "--config", jcfg, "gen-pseudo", "disfluency")
    assert code == 2 and "bogus" in err


def test_output_dir_env(capsys, data, tmp_path, monkeypatch):
    monkeypatch.setenv("DISFL_OUTPUT_DIR", str(tmp_path / "env"))
    code, out, _ = run(capsys, "gen-pseudo", "disfluency", "--fluent", data / "news.txt", "--count", 10)
    assert code == 0
    assert (tmp_path / "env" / "pseudo_disfluency.tsv").is_file()


def test_normalize_command(capsys, tmp_path):
    raw = tmp_path / "raw.txt"
    raw.write_text("The cat, uh, sat-\nuh\nyou know I mean YES\n", encoding="utf-8")
    code, out, _ = run(capsys, "normalize", "--input", raw, "--output", tmp_path / "n.txt")
    assert code == 0 and json.loads(out)["dropped"] == 1
    assert (tmp_path / "n.txt").read_text() == "the cat\nyou_know i_mean yes\n"
