"""Token-level P/R/F1 on the D label, plus the repetition breakdown."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .corpus import DISFLUENT, TaggedSentence

REPETITION = "repetition"
NON_REPETITION = "non_repetition"
FLUENT_CAT = "fluent"
CATEGORIES = (REPETITION, NON_REPETITION)


class AlignmentError(ValueError):
    def __init__(self, message, index):
        super().__init__(f"{message} (sentence {index})")
        self.index = index


def prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class EvalReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    categories: Dict[str, "EvalReport"] = field(default_factory=dict)
    uncategorized_fp: Optional[int] = None

    @property
    def precision(self) -> float:
        return prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return prf(self.tp, self.fp, self.fn)[2]

    def to_dict(self) -> dict:
        d = {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }
        if self.categories:
            d["categories"] = {k: v.to_dict() for k, v in self.categories.items()}
        if self.uncategorized_fp is not None:
            d["uncategorized_fp"] = self.uncategorized_fp
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def summary(self) -> str:
        """One-decimal percentages, the way result tables print them."""
        lines = [f"P={100 * self.precision:.1f} R={100 * self.recall:.1f} F1={100 * self.f1:.1f}"
                 f" (tp={self.tp} fp={self.fp} fn={self.fn})"]
        for name, sub in self.categories.items():
            lines.append(f"  {name}: P={100 * sub.precision:.1f} R={100 * sub.recall:.1f}"
                         f" F1={100 * sub.f1:.1f}")
        if self.uncategorized_fp is not None:
            lines.append(f"  uncategorized fp: {self.uncategorized_fp}")
        return "\n".join(lines)


def _pairs(gold: Iterable[TaggedSentence], pred: Iterable[TaggedSentence]):
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        n = min(len(gold), len(pred))
        raise AlignmentError(f"{len(gold)} gold vs {len(pred)} predicted sentences", n)
    for i, (g, p) in enumerate(zip(gold, pred)):
        if g.tokens != p.tokens:
            raise AlignmentError("token sequences differ", i)
        yield g, p


def score(gold: Iterable[TaggedSentence], pred: Iterable[TaggedSentence]) -> EvalReport:
    rep = EvalReport()
    for g, p in _pairs(gold, pred):
        for gl, pl in zip(g.labels, p.labels):
            gd, pd = gl == DISFLUENT, pl == DISFLUENT
            if gd and pd:
                rep.tp += 1
            elif pd:
                rep.fp += 1
            elif gd:
                rep.fn += 1
    return rep


def categorize_reparandum(t: TaggedSentence) -> List[str]:
    """Label each token repetition / non_repetition / fluent.

    A maximal run of D tokens counts as a repetition when the same tokens
    follow it immediately.
    """
    toks, labs = t.tokens, t.labels
    out = [FLUENT_CAT] * len(toks)
    i = 0
    while i < len(toks):
        if labs[i] != DISFLUENT:
            i += 1
            continue
        j = i
        while j < len(toks) and labs[j] == DISFLUENT:
            j += 1
        span = toks[i:j]
        cat = REPETITION if toks[j:j + len(span)] == span else NON_REPETITION
        for k in range(i, j):
            out[k] = cat
        i = j
    return out


def score_by_category(gold: Iterable[TaggedSentence], pred: Iterable[TaggedSentence]) -> EvalReport:
    """Overall report with repetition / non_repetition sub-reports.

    Category membership comes from the gold analysis. A predicted D on a
    gold-O token counts against overall precision only; it is tallied as
    ``uncategorized_fp`` and left out of both category reports.
    """
    overall = EvalReport(uncategorized_fp=0)
    subs = {c: EvalReport() for c in CATEGORIES}
    for g, p in _pairs(gold, pred):
        cats = categorize_reparandum(g)
        for gl, pl, cat in zip(g.labels, p.labels, cats):
            gd, pd = gl == DISFLUENT, pl == DISFLUENT
            if gd and pd:
                overall.tp += 1
                subs[cat].tp += 1
            elif gd:
                overall.fn += 1
                subs[cat].fn += 1
            elif pd:
                overall.fp += 1
                overall.uncategorized_fp += 1
    overall.categories = subs
    return overall


def judge_accuracy(gold_labels, pred_labels) -> float:
    gold_labels, pred_labels = list(gold_labels), list(pred_labels)
    if len(gold_labels) != len(pred_labels):
        raise AlignmentError("label count mismatch", min(len(gold_labels), len(pred_labels)))
    if not gold_labels:
        return 0.0
    return sum(g == p for g, p in zip(gold_labels, pred_labels)) / len(gold_labels)
