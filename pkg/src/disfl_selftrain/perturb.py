"""Pseudo-corpus generation by random perturbation of fluent sentences.

Two corpora come out of here:

* a disfluency corpus, where Repetition/Inserting noise is added and the
  added words are labeled D (everything else O);
* a grammaticality corpus, where half the sentences are kept verbatim
  (``right``) and the rest get Repetition/Inserting/Delete noise (``error``).
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .corpus import (
    DISFLUENT,
    ERROR,
    FLUENT,
    RIGHT,
    JudgedSentence,
    Sentence,
    TaggedSentence,
)
from .rng import stream

logger = logging.getLogger(__name__)

REPETITION = "Repetition"
INSERTING = "Inserting"
DELETE = "Delete"

DISFLUENCY_OPS = (REPETITION, INSERTING)
JUDGE_OPS = (REPETITION, INSERTING, DELETE)

MAX_POSITIONS = 3
MAX_SPAN = 6
MAX_RESAMPLES = 100


class PerturbError(ValueError):
    pass


@dataclass
class PerturbationPlan:
    positions: List[int]
    ops: List[str]
    spans: List[int]
    ngram_payloads: List[Optional[Tuple[str, ...]]] = field(default_factory=list)

    def check(self, allowed_ops=JUDGE_OPS, max_positions=MAX_POSITIONS, max_span=MAX_SPAN):
        assert 1 <= len(self.positions) <= max_positions, self.positions
        assert len(set(self.positions)) == len(self.positions)
        assert len(self.ops) == len(self.spans) == len(self.positions) == len(self.ngram_payloads)
        for op, m, gram in zip(self.ops, self.spans, self.ngram_payloads):
            assert op in allowed_ops, op
            assert 1 <= m <= max_span, m
            if op == INSERTING:
                assert gram is not None and len(gram) == m


class NgramSampler:
    """Draws contiguous m-grams from a fluent corpus.

    A sentence is drawn uniformly, then a start position uniformly over the
    starts that fit the requested m. Sentences shorter than m are rejected
    and redrawn.
    """

    def __init__(self, source: Iterable[Sentence], max_n: int = MAX_SPAN):
        self.sentences = [s.tokens for s in source if len(s)]
        if not self.sentences:
            raise PerturbError("n-gram source corpus is empty")
        self.max_n = max_n
        self.longest = max(len(s) for s in self.sentences)

    def sample(self, m: int, rng) -> Tuple[str, ...]:
        if not 1 <= m <= self.max_n:
            raise PerturbError(f"m={m} outside [1, {self.max_n}]")
        # shrink rather than loop forever on a corpus of short sentences
        m = min(m, self.longest)
        while True:
            toks = self.sentences[rng.randrange(len(self.sentences))]
            if len(toks) < m:
                continue
            start = rng.randrange(len(toks) - m + 1)
            return toks[start:start + m]


def _tagged_pairs(s) -> List[Tuple[str, str]]:
    if isinstance(s, TaggedSentence):
        return list(zip(s.tokens, s.labels))
    return [(t, FLUENT) for t in s.tokens]


def _from_pairs(pairs) -> TaggedSentence:
    return TaggedSentence(Sentence(tuple(t for t, _ in pairs)), tuple(l for _, l in pairs))


def apply_repetition(s, k: int, m: int) -> TaggedSentence:
    """Repeat the m tokens starting at k; the first copy is labeled D.

    ``s`` may be a Sentence or an already perturbed TaggedSentence.
    """
    pairs = _tagged_pairs(s)
    if not pairs:
        raise PerturbError("cannot perturb an empty sentence")
    if not 0 <= k < len(pairs):
        raise PerturbError(f"position {k} outside sentence of length {len(pairs)}")
    if m < 1:
        raise PerturbError(f"span must be positive, got {m}")
    m = min(m, len(pairs) - k)
    copy = [(tok, DISFLUENT) for tok, _ in pairs[k:k + m]]
    return _from_pairs(pairs[:k] + copy + pairs[k:])


def apply_inserting(s, k: int, gram: Sequence[str]) -> TaggedSentence:
    """Insert ``gram`` before position k (k == len(s) appends), labeled D."""
    pairs = _tagged_pairs(s)
    if not gram:
        raise PerturbError("empty n-gram payload")
    if len(gram) > MAX_SPAN:
        raise PerturbError(f"n-gram longer than {MAX_SPAN}")
    if not 0 <= k <= len(pairs):
        raise PerturbError(f"position {k} outside [0, {len(pairs)}]")
    return _from_pairs(pairs[:k] + [(tok, DISFLUENT) for tok in gram] + pairs[k:])


def apply_delete(s: Sentence, k: int, m: int) -> Sentence:
    """Remove the m tokens starting at k. Raises if nothing would remain."""
    toks = s.tokens
    if not 0 <= k < len(toks):
        raise PerturbError(f"position {k} outside sentence of length {len(toks)}")
    m = min(m, len(toks) - k)
    out = toks[:k] + toks[k + m:]
    if not out:
        raise PerturbError("delete would empty the sentence")
    return Sentence(out)


def strip_D(t: TaggedSentence) -> Sentence:
    return Sentence(tuple(tok for tok, lab in zip(t.tokens, t.labels) if lab != DISFLUENT))


def draw_plan(
    n_tokens: int,
    rng,
    sampler: NgramSampler,
    ops: Sequence[str],
    max_positions: int = MAX_POSITIONS,
    max_span: int = MAX_SPAN,
) -> PerturbationPlan:
    """Draw positions, operations and spans for one sentence.

    Positions are distinct indices into the original sentence. Index
    ``n_tokens`` (sentence end) is only valid for Inserting. Spans of
    Repetition/Delete are clamped so they stop short of the next chosen
    position, which keeps perturbations from overlapping.
    """
    if n_tokens < 1:
        raise PerturbError("cannot perturb an empty sentence")
    n_pos = min(rng.randint(1, max_positions), n_tokens)
    slots = n_tokens + 1 if INSERTING in ops else n_tokens
    positions = sorted(rng.sample(range(slots), n_pos))
    plan = PerturbationPlan([], [], [], [])
    for j, k in enumerate(positions):
        choices = ops if k < n_tokens else (INSERTING,)
        op = choices[rng.randrange(len(choices))]
        m = rng.randint(1, max_span)
        gram = None
        if op == INSERTING:
            gram = sampler.sample(m, rng)
            m = len(gram)
        else:
            limit = (positions[j + 1] if j + 1 < len(positions) else n_tokens) - k
            m = min(m, limit)
        plan.positions.append(k)
        plan.ops.append(op)
        plan.spans.append(m)
        plan.ngram_payloads.append(gram)
    plan.check(ops, max_positions, max_span)
    return plan


def apply_plan(s: Sentence, plan: PerturbationPlan) -> TaggedSentence:
    """Apply Repetition/Inserting right-to-left. Delete is not allowed here."""
    out = s
    for k, op, m, gram in sorted(
        zip(plan.positions, plan.ops, plan.spans, plan.ngram_payloads), key=lambda x: -x[0]
    ):
        if op == REPETITION:
            out = apply_repetition(out, k, m)
        elif op == INSERTING:
            out = apply_inserting(out, k, gram)
        else:
            raise PerturbError(f"{op} has no token labels")
    if isinstance(out, Sentence):
        out = TaggedSentence(out, (FLUENT,) * len(out))
    return out


def apply_plan_surface(s: Sentence, plan: PerturbationPlan) -> Sentence:
    """Apply any plan (including Delete) and return only the token surface."""
    toks = list(s.tokens)
    for k, op, m, gram in sorted(
        zip(plan.positions, plan.ops, plan.spans, plan.ngram_payloads), key=lambda x: -x[0]
    ):
        if op == REPETITION:
            toks[k:k] = toks[k:k + m]
        elif op == INSERTING:
            toks[k:k] = list(gram)
        elif op == DELETE:
            del toks[k:k + m]
    return Sentence(tuple(toks))


def perturb_disfluent(s: Sentence, sampler: NgramSampler, seed: int, index: int) -> TaggedSentence:
    rng = stream(seed, "disfluency", index)
    plan = draw_plan(len(s), rng, sampler, DISFLUENCY_OPS)
    return apply_plan(s, plan)


def perturb_judged(
    s: Sentence, sampler: NgramSampler, seed: int, index: int, error_fraction: float = 0.5
) -> Tuple[JudgedSentence, Optional[PerturbationPlan]]:
    rng = stream(seed, "judge", index)
    if rng.random() >= error_fraction:
        return JudgedSentence(s, RIGHT), None
    for _ in range(MAX_RESAMPLES):
        plan = draw_plan(len(s), rng, sampler, JUDGE_OPS)
        out = apply_plan_surface(s, plan)
        if len(out):
            return JudgedSentence(out, ERROR), plan
    # only reachable for one-token sources that keep drawing Delete
    plan = draw_plan(len(s), rng, sampler, DISFLUENCY_OPS)
    return JudgedSentence(apply_plan_surface(s, plan), ERROR), plan


# Worker-side state for process pools; set once per worker by the initializer.
_worker_sampler: Optional[NgramSampler] = None


def _init_worker(sampler):
    global _worker_sampler
    _worker_sampler = sampler


def _disfl_job(args):
    i, s, seed = args
    return perturb_disfluent(s, _worker_sampler, seed, i)


def _judge_job(args):
    i, s, seed, frac = args
    return perturb_judged(s, _worker_sampler, seed, i, frac)[0]


def _take(fluent, count, what):
    items = list(islice(fluent, count))
    if len(items) < count:
        logger.warning("%s: input exhausted after %d of %d sentences", what, len(items), count)
    for i, s in enumerate(items):
        if not len(s):
            raise PerturbError(f"source sentence {i} is empty")
    return items


def _run(job, args, sampler, workers):
    if workers <= 1:
        _init_worker(sampler)
        return [job(a) for a in args]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(sampler,)) as ex:
        # map() keeps input order, so output is identical to the serial path
        return list(ex.map(job, args, chunksize=256))


def gen_disfluency_corpus(
    fluent: Iterable[Sentence], sampler: NgramSampler, count: int, seed: int, workers: int = 1
) -> List[TaggedSentence]:
    """One disfluent TaggedSentence per source sentence, first ``count`` sources."""
    items = _take(fluent, count, "disfluency corpus")
    return _run(_disfl_job, [(i, s, seed) for i, s in enumerate(items)], sampler, workers)


def gen_judge_corpus(
    fluent: Iterable[Sentence],
    sampler: NgramSampler,
    count: int,
    seed: int,
    error_fraction: float = 0.5,
    workers: int = 1,
) -> List[JudgedSentence]:
    if not 0.0 <= error_fraction <= 1.0:
        raise PerturbError("error_fraction must lie in [0, 1]")
    items = _take(fluent, count, "judge corpus")
    args = [(i, s, seed, error_fraction) for i, s in enumerate(items)]
    return _run(_judge_job, args, sampler, workers)


def iter_disfluency_corpus(
    fluent: Iterable[Sentence], sampler: NgramSampler, seed: int
) -> Iterator[TaggedSentence]:
    """Streaming, unbounded variant of gen_disfluency_corpus."""
    for i, s in enumerate(fluent):
        yield perturb_disfluent(s, sampler, seed, i)
