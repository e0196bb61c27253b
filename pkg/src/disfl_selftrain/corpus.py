"""Sentence types, text normalization and corpus file formats.

Three on-disk formats are supported:

* plain:  one sentence per line, tokens joined by a single space
* tagged: one ``token<TAB>label`` line per token, blank line between sentences
* judged: one ``label<TAB>tokens`` line per sentence (label is right/error)

All files are UTF-8 with ``\\n`` line endings.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

DISFLUENT = "D"
FLUENT = "O"
TAG_LABELS = (DISFLUENT, FLUENT)

RIGHT = "right"
ERROR = "error"
JUDGE_LABELS = (RIGHT, ERROR)

FILLERS = ("um", "uh")
MERGES = (("you", "know"), ("i", "mean"))
MERGE_GLUE = "_"


class CorpusError(ValueError):
    """Malformed corpus data. ``index`` is the sentence (or line) number."""

    def __init__(self, message: str, index: Optional[int] = None):
        if index is not None:
            message = f"{message} (at {index})"
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[str, ...]
    id: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"invalid token {tok!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_text(cls, line: str, id: Optional[str] = None) -> "Sentence":
        return cls(tuple(line.split()), id)


@dataclass(frozen=True)
class TaggedSentence:
    sentence: Sentence
    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != len(self.sentence.tokens):
            raise CorpusError(
                f"{len(self.sentence.tokens)} tokens but {len(self.labels)} labels"
            )
        for lab in self.labels:
            if lab not in TAG_LABELS:
                raise CorpusError(f"invalid disfluency label {lab!r}")

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self.sentence.tokens

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def build(cls, tokens: Sequence[str], labels: Sequence[str]) -> "TaggedSentence":
        return cls(Sentence(tuple(tokens)), tuple(labels))


@dataclass(frozen=True)
class JudgedSentence:
    sentence: Sentence
    label: str

    def __post_init__(self):
        if self.label not in JUDGE_LABELS:
            raise CorpusError(f"invalid judgment label {self.label!r}")

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self.sentence.tokens


@dataclass
class NormalizationOptions:
    lowercase: bool = True
    remove_punctuation: bool = True
    remove_partial_words: bool = True
    remove_fillers: bool = True
    merge_phrases: bool = True


def is_punctuation(token: str) -> bool:
    return not any(c.isalnum() for c in token)


def is_partial_word(token: str) -> bool:
    return len(token) > 1 and token.endswith("-")


def _strip_edge_punctuation(token: str) -> str:
    # "uh," -> "uh", "cat." -> "cat"; keeps trailing "-" so partial words survive
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum() and token[end - 1] != "-":
        end -= 1
    return token[start:end]


def normalize(raw_line: str, options: Optional[NormalizationOptions] = None) -> Sentence:
    """Normalize one line of transcript text.

    Returns an empty ``Sentence`` when nothing survives; the caller decides
    whether to drop it.
    """
    opts = options or NormalizationOptions()
    text = raw_line.lower() if opts.lowercase else raw_line
    tokens = []
    for tok in text.split():
        if opts.remove_punctuation:
            if is_punctuation(tok):
                continue
            tok = _strip_edge_punctuation(tok)
            if not tok:
                continue
        if opts.remove_partial_words and is_partial_word(tok):
            continue
        if opts.remove_fillers and tok.lower() in FILLERS:
            continue
        tokens.append(tok)
    if opts.merge_phrases:
        tokens = merge_phrases(tokens)
    return Sentence(tuple(tokens))


def merge_phrases(tokens: Sequence[str]) -> list:
    out = []
    i = 0
    while i < len(tokens):
        if i + 1 < len(tokens) and (tokens[i].lower(), tokens[i + 1].lower()) in MERGES:
            out.append(tokens[i] + MERGE_GLUE + tokens[i + 1])
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


def normalize_lines(
    lines: Iterable[str], options: Optional[NormalizationOptions] = None
) -> Tuple[list, int]:
    """Normalize many lines, dropping those that end up empty.

    Returns ``(sentences, n_dropped)``.
    """
    out, dropped = [], 0
    for line in lines:
        s = normalize(line, options)
        if s:
            out.append(s)
        else:
            dropped += 1
    if dropped:
        logger.warning("dropped %d sentences that normalized to nothing", dropped)
    return out, dropped


def _open_lines(path) -> Iterator[Tuple[int, str]]:
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{path}: invalid UTF-8 ({exc.reason})", lineno) from None
            yield lineno, line.rstrip("\n").rstrip("\r")


def read_plain(path) -> Iterator[Sentence]:
    """Yield one Sentence per non-blank line."""
    for _, line in _open_lines(path):
        if line.strip():
            yield Sentence.from_text(line)


def write_plain(path, sentences: Iterable[Sentence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(" ".join(s.tokens))
            fh.write("\n")
            n += 1
    return n


def read_tagged(path) -> Iterator[TaggedSentence]:
    tokens, labels = [], []
    index = 0
    for lineno, line in _open_lines(path):
        if not line.strip():
            if tokens:
                yield TaggedSentence(Sentence(tuple(tokens)), tuple(labels))
                index += 1
                tokens, labels = [], []
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(
                f"{path}: expected 'token<TAB>label' on line {lineno}", index
            )
        tok, lab = parts
        if lab not in TAG_LABELS:
            raise CorpusError(f"{path}: bad label {lab!r} on line {lineno}", index)
        if not tok or any(c.isspace() for c in tok):
            raise CorpusError(f"{path}: bad token {tok!r} on line {lineno}", index)
        tokens.append(tok)
        labels.append(lab)
    if tokens:
        yield TaggedSentence(Sentence(tuple(tokens)), tuple(labels))


def write_tagged(path, tagged: Iterable[TaggedSentence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tagged:
            for tok, lab in zip(t.tokens, t.labels):
                fh.write(f"{tok}\t{lab}\n")
            fh.write("\n")
            n += 1
    return n


def read_judged(path) -> Iterator[JudgedSentence]:
    for lineno, line in _open_lines(path):
        if not line.strip():
            continue
        label, _, text = line.partition("\t")
        if label not in JUDGE_LABELS or not text.strip():
            raise CorpusError(f"{path}: expected 'label<TAB>tokens' on line {lineno}", lineno)
        yield JudgedSentence(Sentence.from_text(text), label)


def write_judged(path, judged: Iterable[JudgedSentence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j in judged:
            fh.write(f"{j.label}\t{' '.join(j.sentence.tokens)}\n")
            n += 1
    return n
