"""Iterative self-training with a grammaticality gate.

One run:

    judge   <- train_judge(perturbed fluent pairs)
    teacher <- train(perturbed fluent sentences)
    repeat:
        draw L_t unlabeled sentences
        label them with the current teacher
        keep those whose D-stripped text the judge calls right
        student <- fine-tune the FIRST teacher on the kept sentences
        teacher <- student

The best student on the dev set wins; without a dev set the last one does.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import judge as judge_mod
from . import perturb, tagger
from .corpus import RIGHT, Sentence, TaggedSentence, read_tagged, write_tagged
from .evaluate import score
from .linear import TrainConfig
from .rng import stable_seed, stage_seed

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
METRICS = "metrics.jsonl"


@dataclass
class LoopConfig:
    iterations_max: int = 8
    pool_schedule: Optional[List[int]] = None
    selection_enabled: bool = True
    seed: int = 0
    dev_set: Optional[str] = None
    stop_patience: int = 2
    pseudo_count: int = 50000
    judge_count: int = 100000
    error_fraction: float = 0.5
    tagger_config: TrainConfig = field(default_factory=TrainConfig)
    judge_config: TrainConfig = field(default_factory=TrainConfig)
    student_config: Optional[TrainConfig] = None
    workers: int = 1

    def __post_init__(self):
        if self.iterations_max < 1:
            raise ValueError("iterations_max must be positive")
        if self.stop_patience < 0:
            raise ValueError("stop_patience must be non-negative")
        if self.pool_schedule is not None:
            sched = list(self.pool_schedule)
            if not sched or any(v < 1 for v in sched):
                raise ValueError("pool schedule entries must be positive")
            if any(b < a for a, b in zip(sched, sched[1:])):
                raise ValueError(f"pool schedule must be non-decreasing: {sched}")
            self.pool_schedule = sched

    def schedule(self, pool_size: int) -> List[int]:
        """Per-iteration sample sizes, each clamped to the pool size."""
        if self.pool_schedule is not None:
            return [min(v, pool_size) for v in self.pool_schedule[: self.iterations_max]]
        first = max(1, pool_size // 16)
        return [min(pool_size, first * 2 ** t) for t in range(self.iterations_max)]


@dataclass
class LoopState:
    t: int = 0
    records: List[dict] = field(default_factory=list)
    best_iteration: Optional[int] = None
    best_f1: Optional[float] = None
    selection_basis: str = "dev"
    teacher_fingerprint: Optional[str] = None
    judge_fingerprint: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


def sample_pool(pool: Sequence[Sentence], L_t: int, seed: int, t: int) -> List[Sentence]:
    """Uniform draw of L_t pool sentences without replacement, in pool order."""
    K = len(pool)
    if L_t > K:
        logger.warning("asked for %d sentences from a pool of %d; taking the whole pool", L_t, K)
        L_t = K
    if L_t == K:
        return list(pool)
    rng = np.random.Generator(np.random.PCG64(stable_seed(seed, "pool", t)))
    idx = np.sort(rng.choice(K, size=L_t, replace=False))
    return [pool[i] for i in idx]


def _judge_mask(pseudo: Sequence[TaggedSentence], judge) -> np.ndarray:
    subs = [perturb.strip_D(p) for p in pseudo]
    ok = np.array([len(s.tokens) > 0 for s in subs], dtype=bool)
    verdicts = judge.classify_many([s for s, k in zip(subs, ok) if k])
    ok[np.flatnonzero(ok)] = [v == RIGHT for v in verdicts]
    return ok


def select_sentences(pseudo: Sequence[TaggedSentence], judge) -> List[TaggedSentence]:
    """Keep the sentences whose D-stripped text the judge calls right."""
    pseudo = list(pseudo)
    if not pseudo:
        return []
    keep = _judge_mask(pseudo, judge)
    return [p for p, k in zip(pseudo, keep) if k]


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _subset_f1(gold, pred, mask):
    g = [x for x, k in zip(gold, mask) if k]
    p = [x for x, k in zip(pred, mask) if k]
    return score(g, p).f1 if g else None


def run_pipeline(
    fluent_corpus: Sequence[Sentence],
    unlabeled_pool: Sequence[Sentence],
    config: LoopConfig,
    dev: Optional[Sequence[TaggedSentence]] = None,
    out_dir=None,
    judge=None,
    teacher=None,
    pool_gold: Optional[Sequence[TaggedSentence]] = None,
):
    """Run the whole loop; returns (best model, LoopState).

    ``judge`` / ``teacher`` skip the corresponding training step when
    given. ``pool_gold`` (gold labels aligned with the pool) adds the F1 of
    the selected and rejected pseudo labels to each record.
    """
    fluent_corpus = list(fluent_corpus)
    pool = list(unlabeled_pool)
    if not pool:
        raise ValueError("empty unlabeled pool")
    if (judge is None or teacher is None) and not fluent_corpus:
        raise ValueError("empty fluent corpus")
    if dev is None and config.dev_set:
        dev = list(read_tagged(config.dev_set))
    gold_by_tokens = None
    if pool_gold is not None:
        if len(pool_gold) != len(pool):
            raise ValueError("pool_gold must align with the pool")
        gold_by_tokens = {id(s): g for s, g in zip(pool, pool_gold)}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    seed = config.seed
    sampler = perturb.NgramSampler(fluent_corpus) if fluent_corpus else None
    if judge is None:
        pairs = perturb.gen_judge_corpus(fluent_corpus, sampler, config.judge_count,
                                         stage_seed(seed, "judge-corpus"), config.error_fraction,
                                         workers=config.workers)
        judge = judge_mod.train_judge(pairs, config.judge_config)
    if teacher is None:
        pseudo = perturb.gen_disfluency_corpus(fluent_corpus, sampler, config.pseudo_count,
                                               stage_seed(seed, "pseudo-corpus"), workers=config.workers)
        teacher = tagger.train(pseudo, config.tagger_config)
    first = teacher
    student_cfg = config.student_config or config.tagger_config

    state = LoopState(selection_basis="dev" if dev else "schedule",
                      teacher_fingerprint=first.fingerprint, judge_fingerprint=judge.fingerprint)
    if out is not None:
        judge.save(out / "judge.bin")

    def dev_metrics(model):
        if not dev:
            return {"precision": None, "recall": None, "f1": None}
        rep = score(dev, model.predict_many([d.sentence for d in dev]))
        return {"precision": rep.precision, "recall": rep.recall, "f1": rep.f1}

    rec0 = {"t": 0, "L_t": 0, "J_t": 0, "judge_pass_rate": None, "skipped": False,
            "fingerprint": first.fingerprint, "init_fingerprint": None, **dev_metrics(first)}
    records = [rec0]

    def checkpoint(rec, model, selected):
        if out is None:
            return
        d = out / f"iter_{rec['t']:02d}"
        d.mkdir(exist_ok=True)
        if model is not None:
            model.save(d / "model.bin")
        if selected is not None:
            write_tagged(d / "selected.tsv", selected)
        _write_json(d / "metrics.json", rec)

    checkpoint(rec0, first, None)
    best_t, best_f1, bad = 0, rec0["f1"], 0
    best_model = first
    current = first
    for t, L_t in enumerate(config.schedule(len(pool)), start=1):
        state.t = t
        batch = sample_pool(pool, L_t, seed, t)
        labeled = current.predict_many(batch)
        if config.selection_enabled:
            mask = _judge_mask(labeled, judge)
        else:
            mask = np.ones(len(labeled), dtype=bool)
        selected = [p for p, k in zip(labeled, mask) if k]
        rec = {"t": t, "L_t": len(batch), "J_t": len(selected),
               "judge_pass_rate": len(selected) / len(batch), "init_fingerprint": first.fingerprint}
        if gold_by_tokens is not None:
            gold = [gold_by_tokens[id(s)] for s in batch]
            rec["selected_f1"] = _subset_f1(gold, labeled, mask)
            rec["rejected_f1"] = _subset_f1(gold, labeled, ~mask)
            rec["pool_f1"] = score(gold, labeled).f1
        if not selected:
            logger.warning("iteration %d: nothing passed the judge, skipping student training", t)
            rec.update(skipped=True, fingerprint=None, precision=None, recall=None, f1=None)
            student = None
        else:
            cfg = replace(student_cfg, seed=stable_seed(student_cfg.seed, "student", t) % (2 ** 31))
            student = tagger.train(selected, cfg, init=first)
            rec.update(skipped=False, fingerprint=student.fingerprint, **dev_metrics(student))
        records.append(rec)
        checkpoint(rec, student, selected)
        logger.info("iteration %d: L=%d J=%d F1=%s", t, rec["L_t"], rec["J_t"], rec["f1"])

        improved = False
        if student is not None:
            current = student
            if dev:
                if rec["f1"] > best_f1:
                    best_t, best_f1, improved = t, rec["f1"], True
                    best_model = student
            else:
                best_t, best_model, improved = t, student, True
        if dev:
            bad = 0 if improved else bad + 1
            if config.stop_patience and bad >= config.stop_patience:
                logger.info("no dev improvement for %d iterations, stopping", bad)
                break

    state.records = records
    state.best_iteration = best_t
    state.best_f1 = best_f1
    if out is not None:
        with open(out / METRICS, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        manifest = dict(state.to_dict(), best_checkpoint=f"iter_{best_t:02d}/model.bin")
        _write_json(out / MANIFEST, manifest)
    return best_model, state


def load_best(out_dir) -> tagger.TaggerModel:
    manifest = json.loads((Path(out_dir) / MANIFEST).read_text(encoding="utf-8"))
    return tagger.load(Path(out_dir) / manifest["best_checkpoint"])
