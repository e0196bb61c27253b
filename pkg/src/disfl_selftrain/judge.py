"""Sentence-level grammaticality judge (right vs error).

Same seam as the tagger: ``JudgeModel`` exposes ``classify_many``, ``save``
and a ``backend`` id. The bundled backend is the averaged logistic model
from ``linear`` over hashed sentence features (word n-grams, repeated
n-grams inside a short window, a length bucket).
"""
from __future__ import annotations

import hashlib
import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import features as F
from . import linear
from .corpus import ERROR, RIGHT, JudgedSentence, Sentence
from .linear import ModelError, TrainConfig
from .tagger import split_dev

logger = logging.getLogger(__name__)

BACKEND = "hashed-linear-v1"
KIND = "judge"


class JudgeModel:
    backend = BACKEND

    def __init__(self, w, vocab: F.Vocab, hash_bits: int, metadata: dict = None):
        self.w = w
        self.vocab = vocab
        self.hash_bits = hash_bits
        self.metadata = metadata or {}

    @property
    def fingerprint(self) -> str:
        return linear.fingerprint(self.w)

    def _csr(self, token_lists):
        raw, mapped, _, offsets = self.vocab.encode(token_lists)
        return F.judge_features(raw, mapped, offsets, np.int64((1 << self.hash_bits) - 1))

    def error_scores(self, sentences: Sequence[Sentence]) -> np.ndarray:
        """Logit of the error label, one per sentence."""
        token_lists = [s.tokens for s in sentences]
        if any(len(t) == 0 for t in token_lists):
            raise ValueError("cannot judge an empty sentence")
        if not token_lists:
            return np.zeros(0)
        return linear.scores(*self._csr(token_lists), self.w)

    def classify_many(self, sentences: Sequence[Sentence]) -> List[str]:
        return [ERROR if z > 0.0 else RIGHT for z in self.error_scores(list(sentences))]

    def classify(self, s: Sentence) -> str:
        return self.classify_many([s])[0]

    def save(self, path):
        header = {
            "backend": self.backend,
            "hash_bits": self.hash_bits,
            "metadata": self.metadata,
            "vocab": self.vocab.to_json(),
        }
        linear.save_arrays(path, KIND, header, {"w": self.w})

    @classmethod
    def load(cls, path) -> "JudgeModel":
        header, arrays = linear.load_arrays(path, KIND)
        if header.get("backend") != BACKEND:
            raise ModelError(f"{path}: unknown judge backend {header.get('backend')!r}")
        return cls(arrays["w"], F.Vocab.from_json(header["vocab"]), header["hash_bits"], header["metadata"])


def classify(model: JudgeModel, s: Sentence) -> str:
    return model.classify(s)


def save(model: JudgeModel, path):
    model.save(path)


def load(path) -> JudgeModel:
    return JudgeModel.load(path)


def corpus_fingerprint(corpus: Sequence[JudgedSentence]) -> str:
    h = hashlib.sha256()
    for j in corpus:
        h.update(j.label.encode())
        h.update(b"\t")
        h.update(" ".join(j.tokens).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()[:16]


def train_judge(corpus: Iterable[JudgedSentence], config: Optional[TrainConfig] = None) -> JudgeModel:
    config = config or TrainConfig()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty training corpus")
    labels = {j.label for j in corpus}
    if labels != {RIGHT, ERROR}:
        raise ValueError(f"judge corpus needs both labels, found only {sorted(labels)}")

    tr_idx, dev_idx = split_dev(len(corpus), config.dev_fraction, config.seed, "judge")
    train_part = [corpus[i] for i in tr_idx]
    dev_part = [corpus[i] for i in dev_idx]
    vocab = F.Vocab().update(j.tokens for j in train_part)
    probe = JudgeModel(None, vocab, config.hash_bits)

    y = np.array([j.label == ERROR for j in train_part], dtype=np.float64)
    dev = None
    if dev_part:
        d_y = np.array([j.label == ERROR for j in dev_part], dtype=np.float64)
        dev = (*probe._csr([j.tokens for j in dev_part]), d_y)
    w, history = linear.fit(*probe._csr([j.tokens for j in train_part]), y, config, dev=dev, stage="judge")

    metadata = {
        "config": linear.config_json(config),
        "corpus_fingerprint": corpus_fingerprint(corpus),
        "n_sentences": len(train_part),
        "history": history,
    }
    model = JudgeModel(w, vocab, config.hash_bits, metadata)
    if dev_part:
        from .evaluate import judge_accuracy

        acc = judge_accuracy([j.label for j in dev_part], model.classify_many([j.sentence for j in dev_part]))
        metadata["heldout"] = {"accuracy": acc, "n": len(dev_part)}
        logger.info("judge held-out accuracy %.4f", acc)
    return model
