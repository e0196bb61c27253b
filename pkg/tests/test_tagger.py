import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disfl_selftrain import tagger
from disfl_selftrain.corpus import Sentence, TaggedSentence
from disfl_selftrain.linear import ModelError, TrainConfig
from disfl_selftrain.perturb import apply_repetition


def test_output_length_matches_input(small_teacher):
    rng = random.Random(0)
    words = ["the", "cat", "zzunseen", "we", "a", "b"]
    for n in range(1, 101):
        s = Sentence(tuple(rng.choice(words) for _ in range(n)))
        assert len(tagger.predict(small_teacher, s).labels) == n


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "the", "of", "qq"]), min_size=1, max_size=40))
def test_labels_are_D_or_O(small_teacher, toks):
    out = small_teacher.predict(Sentence(tuple(toks)))
    assert set(out.labels) <= {"D", "O"}
    assert out.tokens == tuple(toks)


def test_predict_rejects_empty(small_teacher):
    with pytest.raises(ValueError):
        small_teacher.predict(Sentence(()))


def test_save_load_round_trip(small_teacher, pseudo, tmp_path):
    p = tmp_path / "m.bin"
    tagger.save(small_teacher, p)
    loaded = tagger.load(p)
    sents = [t.sentence for t in pseudo[3000:3300]]
    assert loaded.predict_many(sents) == small_teacher.predict_many(sents)
    assert loaded.fingerprint == small_teacher.fingerprint
    assert loaded.metadata == small_teacher.metadata


def test_training_is_deterministic(pseudo, tmp_path):
    cfg = TrainConfig(seed=5, epochs=2)
    a = tagger.train(pseudo[:800], cfg)
    b = tagger.train(pseudo[:800], cfg)
    a.save(tmp_path / "a.bin")
    b.save(tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_metadata(small_teacher):
    md = small_teacher.metadata
    assert md["config"]["seed"] == 3
    assert md["config"]["epochs"] == 3
    assert len(md["corpus_fingerprint"]) == 16
    assert md["n_sentences"] == 2700
    assert md["heldout"]["f1"] > 0.5
    assert md["init_fingerprint"] is None


def test_heldout_loss_improves_on_init(small_teacher):
    hist = small_teacher.metadata["history"]
    assert hist[-1]["dev_loss"] < hist[0]["dev_loss"]


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        tagger.train([], TrainConfig())


def test_backend_and_size_mismatch(small_teacher, pseudo):
    class Other:
        backend = "something-else"

    with pytest.raises(ModelError):
        tagger.train(pseudo[:50], TrainConfig(), init=Other())
    with pytest.raises(ModelError):
        tagger.train(pseudo[:50], TrainConfig(hash_bits=16), init=small_teacher)


def test_zero_epoch_fine_tune_predicts_like_init(small_teacher, pseudo):
    student = tagger.train(pseudo[3000:3400], TrainConfig(epochs=0), init=small_teacher)
    sents = [t.sentence for t in pseudo[3400:3800]]
    assert student.predict_many(sents) == small_teacher.predict_many(sents)
    assert student.metadata["init_fingerprint"] == small_teacher.fingerprint


def test_fine_tune_starts_from_init(small_teacher, pseudo):
    student = tagger.train(pseudo[3000:3400], TrainConfig(epochs=1, seed=2), init=small_teacher)
    assert student.metadata["init_fingerprint"] == small_teacher.fingerprint
    assert student.fingerprint != small_teacher.fingerprint


def test_load_rejects_corrupt_and_judge_files(small_teacher, small_judge, tmp_path):
    p = tmp_path / "m.bin"
    small_teacher.save(p)
    data = p.read_bytes()
    (tmp_path / "trunc.bin").write_bytes(data[:-10])
    (tmp_path / "magic.bin").write_bytes(b"XXXXXXXX" + data[8:])
    (tmp_path / "ver.bin").write_bytes(data[:8] + (99).to_bytes(4, "little") + data[12:])
    for name in ("trunc.bin", "magic.bin", "ver.bin"):
        with pytest.raises(ModelError):
            tagger.load(tmp_path / name)
    small_judge.save(tmp_path / "j.bin")
    with pytest.raises(ModelError, match="judge"):
        tagger.load(tmp_path / "j.bin")


def test_learns_left_neighbour_equality():
    # D exactly when a token equals its left neighbour: separable by the duplicate features
    rng = random.Random(4)
    vocab = [f"w{i}" for i in range(40)]
    data = []
    for _ in range(1500):
        toks = [rng.choice(vocab) for _ in range(rng.randint(3, 14))]
        for i in range(1, len(toks)):
            if rng.random() < 0.2:
                toks[i] = toks[i - 1]
        labels = ["O"] + ["D" if toks[i] == toks[i - 1] else "O" for i in range(1, len(toks))]
        data.append(TaggedSentence.build(toks, labels))
    train, test = data[:1200], data[1200:]
    model = tagger.train(train, TrainConfig(seed=1))
    pred = model.predict_many([t.sentence for t in test])
    correct = sum(g == p for t, q in zip(test, pred) for g, p in zip(t.labels, q.labels))
    total = sum(len(t) for t in test)
    assert correct / total >= 0.99


def test_repetition_first_copy_found(small_teacher, news):
    # inject a 2-token repetition at the start of held-out sentences: "a b a b c"
    hits = total = 0
    for s in news[3000:4000]:
        if len(s) < 3:
            continue
        t = apply_repetition(s, 0, 2)
        p = small_teacher.predict(t.sentence)
        total += 1
        hits += p.labels[:4] == ("D", "D", "O", "O")
    assert hits / total >= 0.90


def test_split_dev_deterministic():
    a = tagger.split_dev(100, 0.1, 0, "x")
    b = tagger.split_dev(100, 0.1, 0, "x")
    assert np.array_equal(a[0], b[0]) and len(a[1]) == 10
    assert len(tagger.split_dev(100, 0.0, 0, "x")[1]) == 0
