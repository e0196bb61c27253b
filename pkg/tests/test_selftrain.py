import json

import pytest

from disfl_selftrain import selftrain, synthetic, tagger
from disfl_selftrain.corpus import ERROR, RIGHT, Sentence, TaggedSentence, read_tagged
from disfl_selftrain.linear import TrainConfig
from disfl_selftrain.perturb import strip_D
from disfl_selftrain.selftrain import LoopConfig, run_pipeline, sample_pool, select_sentences


class ConstJudge:
    fingerprint = "const"

    def __init__(self, label):
        self.label = label
        self.seen = []

    def classify_many(self, sents):
        self.seen.extend(sents)
        return [self.label] * len(sents)


@pytest.fixture(scope="module")
def speech():
    return synthetic.simulate_speech(600, 31)


@pytest.fixture(scope="module")
def dev():
    return [x.gold for x in synthetic.simulate_speech(200, 32)]


def loop_cfg(**kw):
    base = dict(seed=1, iterations_max=3, stop_patience=0, student_config=TrainConfig(epochs=2, seed=1))
    base.update(kw)
    return LoopConfig(**base)


def test_schedule_default_and_override():
    assert LoopConfig(iterations_max=6).schedule(160) == [10, 20, 40, 80, 160, 160]
    assert LoopConfig(pool_schedule=[5, 50, 500]).schedule(100) == [5, 50, 100]
    with pytest.raises(ValueError):
        LoopConfig(pool_schedule=[10, 5])
    with pytest.raises(ValueError):
        LoopConfig(iterations_max=0)


def test_sample_pool_properties(news, caplog):
    pool = news[:500]
    assert sample_pool(pool, 500, 0, 1) == pool
    a = sample_pool(pool, 50, 3, 1)
    assert a == sample_pool(pool, 50, 3, 1)
    assert len(set(map(id, a))) == 50
    assert sample_pool(pool, 900, 0, 1) == pool
    assert "whole pool" in caplog.text


def test_sample_pool_iterations_differ(news):
    pool = news[:1000]
    same = sum(sample_pool(pool, 20, s, 1) == sample_pool(pool, 20, s, 2) for s in range(50))
    assert same == 0


def test_select_all_O_uses_full_sentence():
    t = TaggedSentence.build(["a", "b"], ["O", "O"])
    j = ConstJudge(RIGHT)
    assert select_sentences([t], j) == [t]
    assert j.seen == [Sentence(("a", "b"))]
    assert select_sentences([t], ConstJudge(ERROR)) == []


def test_select_rejects_all_D_without_asking():
    j = ConstJudge(RIGHT)
    assert select_sentences([TaggedSentence.build(["a"], ["D"])], j) == []
    assert j.seen == []


def test_selection_idempotent(small_teacher, small_judge, speech):
    labeled = small_teacher.predict_many([x.gold.sentence for x in speech])
    kept = select_sentences(labeled, small_judge)
    assert 0 < len(kept) < len(labeled)
    assert select_sentences(kept, small_judge) == kept
    assert all(small_judge.classify(strip_D(k)) == RIGHT for k in kept)


def test_pipeline_records_and_checkpoints(small_teacher, small_judge, speech, dev, tmp_path):
    pool = [x.gold.sentence for x in speech]
    best, state = run_pipeline([], pool, loop_cfg(), dev=dev, out_dir=tmp_path / "run",
                               judge=small_judge, teacher=small_teacher,
                               pool_gold=[x.gold for x in speech])
    recs = state.records
    assert [r["t"] for r in recs] == [0, 1, 2, 3]
    assert [r["L_t"] for r in recs[1:]] == [37, 74, 148]
    for r in recs[1:]:
        assert r["J_t"] <= r["L_t"]
        assert r["init_fingerprint"] == small_teacher.fingerprint
        assert "selected_f1" in r and "rejected_f1" in r
    f1s = [r["f1"] for r in recs if r["f1"] is not None]
    assert state.best_f1 == max(f1s)
    assert recs[state.best_iteration]["f1"] == state.best_f1
    assert best.fingerprint == recs[state.best_iteration]["fingerprint"]

    run = tmp_path / "run"
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["best_iteration"] == state.best_iteration
    assert selftrain.load_best(run).fingerprint == best.fingerprint
    lines = (run / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert set(json.loads(lines[1])) >= {"t", "L_t", "J_t", "precision", "recall", "f1", "judge_pass_rate"}
    sel = list(read_tagged(run / "iter_01" / "selected.tsv"))
    assert len(sel) == recs[1]["J_t"]
    assert (run / "iter_00" / "model.bin").is_file()


def test_pipeline_deterministic(small_teacher, small_judge, speech, dev):
    pool = [x.gold.sentence for x in speech]
    _, a = run_pipeline([], pool, loop_cfg(), dev=dev, judge=small_judge, teacher=small_teacher)
    _, b = run_pipeline([], pool, loop_cfg(), dev=dev, judge=small_judge, teacher=small_teacher)
    assert a.records == b.records


def test_no_select_keeps_everything(small_teacher, small_judge, speech, dev):
    pool = [x.gold.sentence for x in speech]
    _, st = run_pipeline([], pool, loop_cfg(selection_enabled=False), dev=dev,
                         judge=small_judge, teacher=small_teacher)
    assert all(r["J_t"] == r["L_t"] for r in st.records)


def test_empty_selection_skips_training(small_teacher, speech, dev):
    pool = [x.gold.sentence for x in speech]
    best, st = run_pipeline([], pool, loop_cfg(stop_patience=2, iterations_max=5), dev=dev,
                            judge=ConstJudge(ERROR), teacher=small_teacher)
    assert [r["skipped"] for r in st.records[1:]] == [True, True]
    assert st.best_iteration == 0 and best is small_teacher


def test_no_dev_returns_last(small_teacher, small_judge, speech):
    pool = [x.gold.sentence for x in speech]
    best, st = run_pipeline([], pool, loop_cfg(iterations_max=2), judge=small_judge, teacher=small_teacher)
    assert st.selection_basis == "schedule"
    assert st.best_iteration == 2
    assert best.fingerprint == st.records[-1]["fingerprint"]


def test_pipeline_trains_judge_and_teacher(news, speech):
    pool = [x.gold.sentence for x in speech[:200]]
    cfg = loop_cfg(iterations_max=1, pseudo_count=1500, judge_count=1500,
                   tagger_config=TrainConfig(epochs=2, seed=2), judge_config=TrainConfig(epochs=2, seed=3))
    best, st = run_pipeline(news, pool, cfg)
    assert st.teacher_fingerprint and st.judge_fingerprint
    assert st.records[1]["init_fingerprint"] == st.teacher_fingerprint
    assert isinstance(best, tagger.TaggerModel)


def test_pipeline_input_checks(small_teacher, small_judge):
    with pytest.raises(ValueError):
        run_pipeline([], [], loop_cfg(), judge=small_judge, teacher=small_teacher)
    with pytest.raises(ValueError):
        run_pipeline([], [Sentence(("a",))], loop_cfg())
