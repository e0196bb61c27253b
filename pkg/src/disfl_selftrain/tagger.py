"""Per-token D/O tagger.

``TaggerModel`` is the backend seam: anything with ``predict_many``,
``save`` and a ``backend`` attribute can stand in for it. The bundled
backend is a hashed-feature averaged logistic regression in two layers:

1. token features (identity window, duplicate-match indicators, position
   and frequency buckets, n-gram fluency of the token's surroundings);
2. the same features plus the first layer's scores for the neighbouring
   tokens, so a token can lean on the decision made for its neighbours.

The first layer's scores used to train the second layer are out-of-fold.
The model also carries the hashed n-gram counts of the fluent skeletons of
everything it was trained on; fine-tuning adds to those counts.
"""
from __future__ import annotations

import hashlib
import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import features as F
from . import linear
from .corpus import DISFLUENT, FLUENT, Sentence, TaggedSentence
from .linear import ModelError, TrainConfig
from .rng import stable_seed

logger = logging.getLogger(__name__)

BACKEND = "hashed-linear-stacked-v1"
KIND = "tagger"
N_FOLDS = 2


class TaggerModel:
    backend = BACKEND

    def __init__(self, w1, w2, vocab: F.Vocab, hash_bits: int, lm: np.ndarray, metadata: dict = None):
        self.w1 = w1
        self.w2 = w2
        self.vocab = vocab
        self.hash_bits = hash_bits
        self.lm = lm
        self.metadata = metadata or {}

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.w1, self.w2, self.lm):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    @property
    def mask(self):
        return np.int64((1 << self.hash_bits) - 1)

    def _base(self, token_lists, keep=None):
        raw, mapped, freq, offsets = self.vocab.encode(token_lists)
        loo = keep is not None
        if keep is None:
            keep = np.ones(raw.shape[0], dtype=np.bool_)
        feats = F.tagger_features(raw, mapped, freq, offsets, self.mask, self.lm, keep, loo)
        return feats, offsets

    def _stacked(self, base, offsets, z1):
        return np.hstack([base, F.stack_features(z1, offsets, self.mask)])

    def token_scores(self, sentences: Sequence[Sentence]) -> List[np.ndarray]:
        token_lists = [s.tokens for s in sentences]
        if any(len(t) == 0 for t in token_lists):
            raise ValueError("cannot tag an empty sentence")
        base, offsets = self._base(token_lists)
        z1 = linear.scores(*F.dense_to_csr(base), self.w1)
        z = linear.scores(*F.dense_to_csr(self._stacked(base, offsets, z1)), self.w2)
        return [z[offsets[k]:offsets[k + 1]] for k in range(len(token_lists))]

    def predict_many(self, sentences: Sequence[Sentence]) -> List[TaggedSentence]:
        sentences = list(sentences)
        if not sentences:
            return []
        out = []
        for s, z in zip(sentences, self.token_scores(sentences)):
            # argmax over {D, O} == positive logit
            labels = tuple(DISFLUENT if v > 0.0 else FLUENT for v in z)
            out.append(TaggedSentence(s, labels))
        return out

    def predict(self, s: Sentence) -> TaggedSentence:
        return self.predict_many([s])[0]

    def save(self, path):
        header = {
            "backend": self.backend,
            "hash_bits": self.hash_bits,
            "metadata": self.metadata,
            "vocab": self.vocab.to_json(),
        }
        linear.save_arrays(path, KIND, header, {"w1": self.w1, "w2": self.w2, "lm": self.lm})

    @classmethod
    def load(cls, path) -> "TaggerModel":
        header, arrays = linear.load_arrays(path, KIND)
        if header.get("backend") != BACKEND:
            raise ModelError(f"{path}: unknown tagger backend {header.get('backend')!r}")
        return cls(arrays["w1"], arrays["w2"], F.Vocab.from_json(header["vocab"]),
                   header["hash_bits"], arrays["lm"], header["metadata"])


def predict(model: TaggerModel, s: Sentence) -> TaggedSentence:
    return model.predict(s)


def save(model: TaggerModel, path):
    model.save(path)


def load(path) -> TaggerModel:
    return TaggerModel.load(path)


def corpus_fingerprint(corpus: Sequence[TaggedSentence]) -> str:
    h = hashlib.sha256()
    for t in corpus:
        h.update(" ".join(t.tokens).encode("utf-8"))
        h.update(b"\t")
        h.update("".join(t.labels).encode())
        h.update(b"\n")
    return h.hexdigest()[:16]


def split_dev(n: int, fraction: float, seed: int, stage: str):
    """Deterministic train/held-out index split."""
    n_dev = int(round(n * fraction))
    if n_dev == 0 or n_dev >= n:
        return np.arange(n), np.arange(0)
    rng = np.random.Generator(np.random.PCG64(stable_seed(seed, stage, "split")))
    perm = rng.permutation(n)
    return np.sort(perm[n_dev:]), np.sort(perm[:n_dev])


def _rows(offsets, sent_idx):
    if not len(sent_idx):
        return np.arange(0)
    return np.concatenate([np.arange(offsets[k], offsets[k + 1]) for k in sent_idx])


def _oof_scores(base, offsets, y, config, init_w1, n_sent):
    """First-layer scores where each sentence is scored by a model that never saw it."""
    if n_sent < N_FOLDS or config.epochs == 0:
        w = init_w1 if init_w1 is not None else np.zeros(1 << config.hash_bits)
        return linear.scores(*F.dense_to_csr(base), w)
    z = np.zeros(base.shape[0])
    rng = np.random.Generator(np.random.PCG64(stable_seed(config.seed, "tagger", "folds")))
    fold_of = rng.permutation(n_sent) % N_FOLDS
    for k in range(N_FOLDS):
        tr_rows = _rows(offsets, np.flatnonzero(fold_of != k))
        te_rows = _rows(offsets, np.flatnonzero(fold_of == k))
        w, _ = linear.fit(*F.dense_to_csr(base[tr_rows]), y[tr_rows], config, init=init_w1,
                          stage=f"tagger-fold{k}")
        z[te_rows] = linear.scores(*F.dense_to_csr(base[te_rows]), w)
    return z


def train(
    corpus: Iterable[TaggedSentence],
    config: Optional[TrainConfig] = None,
    init: Optional[TaggerModel] = None,
) -> TaggerModel:
    """Fit the reference tagger; ``init`` fine-tunes from an existing model.

    Fine-tuning starts both layers from the init weights and adds the new
    corpus to the init model's vocabulary and n-gram counts. With
    ``epochs=0`` nothing is updated and the result predicts exactly like
    ``init``.
    """
    config = config or TrainConfig()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty training corpus")
    if init is not None:
        if getattr(init, "backend", None) != BACKEND:
            raise ModelError(f"cannot fine-tune a {getattr(init, 'backend', None)!r} model with {BACKEND!r}")
        if init.hash_bits != config.hash_bits:
            raise ModelError(f"init uses 2**{init.hash_bits} buckets, config asks 2**{config.hash_bits}")

    tr_idx, dev_idx = split_dev(len(corpus), config.dev_fraction, config.seed, "tagger")
    train_part = [corpus[i] for i in tr_idx]
    dev_part = [corpus[i] for i in dev_idx]
    keep = np.array([lab != DISFLUENT for t in train_part for lab in t.labels], dtype=np.bool_)

    if init is not None and config.epochs == 0:
        vocab, lm = init.vocab, init.lm.copy()
    else:
        vocab = F.Vocab().update(t.tokens for t in train_part)
        if init is not None:
            vocab = init.vocab.merged(vocab)
        lm = np.zeros(1 << F.LM_BITS, dtype=np.uint32) if init is None else init.lm.copy()
        raw, _, _, offsets = vocab.encode([t.tokens for t in train_part])
        F.ngram_counts(raw, offsets, keep, lm)

    probe = TaggerModel(None, None, vocab, config.hash_bits, lm)
    # leave-one-out counts: a training sentence must not vouch for its own n-grams
    base, offsets = probe._base([t.tokens for t in train_part], keep)
    y = np.array([lab == DISFLUENT for t in train_part for lab in t.labels], dtype=np.float64)

    init_w1 = None if init is None else init.w1
    init_w2 = None if init is None else init.w2
    w1, _ = linear.fit(*F.dense_to_csr(base), y, config, init=init_w1, stage="tagger-l1")
    z1 = _oof_scores(base, offsets, y, config, init_w1, len(train_part))
    stacked = probe._stacked(base, offsets, z1)

    dev = None
    if dev_part:
        d_base, d_off = probe._base([t.tokens for t in dev_part])
        d_z1 = linear.scores(*F.dense_to_csr(d_base), w1)
        d_y = np.array([lab == DISFLUENT for t in dev_part for lab in t.labels], dtype=np.float64)
        dev = (*F.dense_to_csr(probe._stacked(d_base, d_off, d_z1)), d_y)
    w2, history = linear.fit(*F.dense_to_csr(stacked), y, config, init=init_w2, dev=dev, stage="tagger")

    metadata = {
        "config": linear.config_json(config),
        "corpus_fingerprint": corpus_fingerprint(corpus),
        "n_sentences": len(train_part),
        "n_tokens": int(y.shape[0]),
        "history": history,
        "init_fingerprint": None if init is None else init.fingerprint,
    }
    model = TaggerModel(w1, w2, vocab, config.hash_bits, lm, metadata)
    if dev_part:
        from .evaluate import score

        report = score(dev_part, model.predict_many([t.sentence for t in dev_part]))
        metadata["heldout"] = report.to_dict()
        logger.info("tagger held-out P=%.3f R=%.3f F1=%.3f", report.precision, report.recall, report.f1)
    return model
