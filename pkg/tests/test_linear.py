import numpy as np
import pytest

from disfl_selftrain import linear
from disfl_selftrain.linear import ModelError, TrainConfig


def toy(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n).astype(np.float64)
    # feature 1 + y is perfectly predictive, feature 10 is noise
    indptr = np.arange(0, 2 * n + 1, 2, dtype=np.int64)
    indices = np.empty(2 * n, dtype=np.int64)
    indices[0::2] = 1 + y.astype(np.int64)
    indices[1::2] = 10 + rng.integers(0, 5, n)
    return indptr, indices, y


def test_config_validation():
    for bad in (dict(epochs=-1), dict(learning_rate=0), dict(batch_size=0), dict(patience=-1),
                dict(dev_fraction=1.0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_fit_separates_toy_problem():
    indptr, indices, y = toy()
    w, _ = linear.fit(indptr, indices, y, TrainConfig(hash_bits=8))
    z = linear.scores(indptr, indices, w)
    assert np.all((z > 0) == (y > 0.5))


def test_minibatch_and_early_stop():
    indptr, indices, y = toy()
    # flip a third of the labels so the held-out loss plateaus
    flip = np.random.default_rng(5).random(y.shape[0]) < 0.33
    y = np.where(flip, 1 - y, y)
    dev = toy(300, 1)
    cfg = TrainConfig(hash_bits=8, batch_size=16, epochs=20, patience=1, learning_rate=1.0)
    w, hist = linear.fit(indptr, indices, y, cfg, dev=dev)
    assert len(hist) < 21
    assert hist[-1]["dev_loss"] < hist[0]["dev_loss"]


def test_zero_epochs_returns_init():
    indptr, indices, y = toy()
    init = np.linspace(-1, 1, 256)
    w, _ = linear.fit(indptr, indices, y, TrainConfig(hash_bits=8, epochs=0), init=init)
    assert np.array_equal(w, init)
    with pytest.raises(ModelError):
        linear.fit(indptr, indices, y, TrainConfig(hash_bits=9), init=init)


def test_log_loss():
    assert linear.log_loss(np.zeros(4), np.array([0, 1, 0, 1.0])) == pytest.approx(np.log(2))


def test_array_file_round_trip(tmp_path):
    arrays = {"w": np.array([0.0, 1.5, 0.0, -2.0]), "lm": np.array([0, 3, 0, 0], dtype=np.uint32)}
    linear.save_arrays(tmp_path / "m.bin", "thing", {"x": 1}, arrays)
    header, back = linear.load_arrays(tmp_path / "m.bin", "thing")
    assert header["x"] == 1
    for k in arrays:
        assert np.array_equal(back[k], arrays[k]) and back[k].dtype == arrays[k].dtype
    with pytest.raises(ModelError, match="expected 'other'"):
        linear.load_arrays(tmp_path / "m.bin", "other")
    (tmp_path / "junk.bin").write_bytes(b"DSTMODEL" + b"\x01\x00\x00\x00" + b"\xff" * 8)
    with pytest.raises(ModelError):
        linear.load_arrays(tmp_path / "junk.bin", "thing")
