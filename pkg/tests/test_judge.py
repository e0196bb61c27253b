import pytest

from disfl_selftrain import judge
from disfl_selftrain.corpus import ERROR, RIGHT, JudgedSentence, Sentence
from disfl_selftrain.linear import ModelError, TrainConfig
from disfl_selftrain.perturb import apply_repetition


def test_classify_returns_one_label(small_judge, news):
    for s in news[:200]:
        assert judge.classify(small_judge, s) in (RIGHT, ERROR)


def test_empty_sentence_rejected(small_judge):
    with pytest.raises(ValueError):
        small_judge.classify(Sentence(()))


def test_single_class_corpus_rejected(news):
    with pytest.raises(ValueError):
        judge.train_judge([JudgedSentence(s, RIGHT) for s in news[:100]])


def test_heldout_accuracy_recorded(small_judge):
    held = small_judge.metadata["heldout"]
    assert held["n"] == 400
    assert 0.5 < held["accuracy"] <= 1.0


def test_deterministic(judge_pairs, tmp_path):
    cfg = TrainConfig(seed=8, epochs=2)
    judge.train_judge(judge_pairs[:1000], cfg).save(tmp_path / "a.bin")
    judge.train_judge(judge_pairs[:1000], cfg).save(tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_save_load_round_trip(small_judge, news, tmp_path):
    p = tmp_path / "j.bin"
    judge.save(small_judge, p)
    loaded = judge.load(p)
    assert loaded.classify_many(news[:300]) == small_judge.classify_many(news[:300])


def test_tagger_file_rejected(small_teacher, tmp_path):
    small_teacher.save(tmp_path / "t.bin")
    with pytest.raises(ModelError, match="tagger"):
        judge.load(tmp_path / "t.bin")


def test_fluent_right_and_repetition_error():
    from disfl_selftrain import perturb, synthetic

    src = synthetic.fluent_corpus(30000, 17, "news")
    pairs = perturb.gen_judge_corpus(src[:28000], perturb.NgramSampler(src[:28000]), 28000, seed=1)
    model = judge.train_judge(pairs, TrainConfig(seed=1))
    held = [s for s in src[28000:] if len(s) >= 3]
    right = sum(v == RIGHT for v in model.classify_many(held)) / len(held)
    rep = [apply_repetition(s, 0, 3).sentence for s in held]
    err = sum(v == ERROR for v in model.classify_many(rep)) / len(rep)
    assert right >= 0.85
    assert err >= 0.85
