"""Hashed feature extraction for the reference tagger and judge.

Tokens become stable 64-bit ids (blake2b, cached per type). Feature
templates combine a template id with one or more token ids through a
splitmix-style mixer and are folded into ``2**hash_bits`` buckets. All
heavy lifting runs in numba over a flat token array plus sentence offsets.
"""
from __future__ import annotations

import hashlib
import math
from typing import Dict, Sequence, Tuple

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1

# reserved ids for padding and rare words
BOS_ID = np.uint64(0x0123456789ABCDEF)
EOS_ID = np.uint64(0x0FEDCBA987654321)
OOV_ID = np.uint64(0x5A5A5A5A5A5A5A5A)

MAX_DIST = 6
WINDOW = 3
N_POS_BUCKETS = 8
N_FREQ_BUCKETS = 12

_token_cache: Dict[str, int] = {}


def token_id(tok: str) -> int:
    tid = _token_cache.get(tok)
    if tid is None:
        tid = int.from_bytes(hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
        if len(_token_cache) < 2_000_000:
            _token_cache[tok] = tid
    return tid


def freq_bucket(count: int) -> int:
    if count <= 0:
        return 0
    return min(1 + int(math.log2(count)), N_FREQ_BUCKETS - 1)


class Vocab:
    """Token counts; tokens seen fewer than ``min_count`` times act as OOV."""

    def __init__(self, counts: Dict[str, int] = None, min_count: int = 2):
        self.counts = dict(counts or {})
        self.min_count = min_count

    def update(self, sentences):
        for toks in sentences:
            for t in toks:
                self.counts[t] = self.counts.get(t, 0) + 1
        return self

    def merged(self, other: "Vocab") -> "Vocab":
        counts = dict(self.counts)
        for t, c in other.counts.items():
            counts[t] = counts.get(t, 0) + c
        return Vocab(counts, self.min_count)

    def encode(self, sentences: Sequence[Sequence[str]]):
        """Flatten sentences into (raw ids, vocab-mapped ids, freq buckets, offsets)."""
        n = sum(len(s) for s in sentences)
        raw = np.empty(n, dtype=np.uint64)
        mapped = np.empty(n, dtype=np.uint64)
        freq = np.empty(n, dtype=np.int64)
        offsets = np.empty(len(sentences) + 1, dtype=np.int64)
        offsets[0] = 0
        p = 0
        counts, min_count = self.counts, self.min_count
        for si, toks in enumerate(sentences):
            for t in toks:
                tid = token_id(t)
                c = counts.get(t, 0)
                raw[p] = tid
                mapped[p] = tid if c >= min_count else OOV_ID
                freq[p] = freq_bucket(c) if c >= min_count else 0
                p += 1
            offsets[si + 1] = p
        return raw, mapped, freq, offsets

    def to_json(self):
        return {"min_count": self.min_count, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["counts"], obj["min_count"])


@njit(cache=True)
def _mix(h, v):
    x = h ^ v
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def _feat(template, a, b, mask):
    h = _mix(np.uint64(template) * np.uint64(0x9E3779B97F4A7C15), a)
    h = _mix(h, b)
    return np.int64(h & mask)


@njit(cache=True)
def _pos_bucket(i):
    if i < 4:
        return i
    if i < 6:
        return 4
    if i < 10:
        return 5
    if i < 16:
        return 6
    return 7



# n-gram count table: uni/bi/trigrams of fluent text share one hashed array,
# the order is part of the key; slot 0 of the key space holds the token total
LM_BITS = 23
PAD = np.uint64(0)
BACKOFF = 0.4


@njit(cache=True)
def _slot(order, a, b, c, lm_mask):
    h = _mix(np.uint64(0xB16B00B5) + np.uint64(order), a)
    h = _mix(h, b)
    h = _mix(h, c)
    return np.int64(h & lm_mask)


@njit(cache=True)
def _skeleton(raw, lo, hi, keep):
    """Kept tokens of one sentence padded as BOS BOS w... EOS."""
    seq = np.empty(hi - lo + 3, dtype=np.uint64)
    seq[0] = BOS_ID
    seq[1] = BOS_ID
    n = 2
    for p in range(lo, hi):
        if keep[p]:
            seq[n] = raw[p]
            n += 1
    seq[n] = EOS_ID
    return seq[:n + 1]


@njit(cache=True)
def _ngram_slots(seq, lm_mask):
    n = seq.shape[0]
    out = np.empty(3 * n, dtype=np.int64)
    k = 0
    for j in range(1, n):
        out[k] = _slot(1, seq[j], PAD, PAD, lm_mask)
        k += 1
        out[k] = _slot(2, seq[j - 1], seq[j], PAD, lm_mask)
        k += 1
        if j >= 2:
            out[k] = _slot(3, seq[j - 2], seq[j - 1], seq[j], lm_mask)
            k += 1
    return out[:k]


@njit(cache=True)
def ngram_counts(raw, offsets, keep, table):
    """Add n-gram counts of every sentence's kept tokens to ``table``."""
    lm_mask = np.uint64(table.shape[0] - 1)
    total = _slot(0, PAD, PAD, PAD, lm_mask)
    for s in range(offsets.shape[0] - 1):
        seq = _skeleton(raw, offsets[s], offsets[s + 1], keep)
        slots = _ngram_slots(seq, lm_mask)
        for q in range(slots.shape[0]):
            if table[slots[q]] < 4294967295:
                table[slots[q]] += 1
        table[total] += seq.shape[0] - 2


@njit(cache=True)
def _count(table, slot, own):
    c = np.int64(table[slot])
    for q in range(own.shape[0]):
        if own[q] == slot:
            c -= 1
    return c


@njit(cache=True)
def _logp(table, u, v, w, own, total, lm_mask):
    """Stupid-backoff log score of w after (u, v)."""
    c_uv = _count(table, _slot(2, u, v, PAD, lm_mask), own)
    if c_uv > 0:
        c_uvw = _count(table, _slot(3, u, v, w, lm_mask), own)
        if c_uvw > 0:
            return np.log(c_uvw / c_uv)
    c_v = _count(table, _slot(1, v, PAD, PAD, lm_mask), own)
    if c_v > 0:
        c_vw = _count(table, _slot(2, v, w, PAD, lm_mask), own)
        if c_vw > 0:
            return np.log(BACKOFF * c_vw / c_v)
    c_w = _count(table, _slot(1, w, PAD, PAD, lm_mask), own)
    return np.log(BACKOFF * BACKOFF * (c_w + 0.5) / (total + 1.0))


@njit(cache=True)
def _bucket(x, step, lo, hi):
    b = int(np.floor(x / step))
    if b < lo:
        return lo - lo
    if b > hi:
        return hi - lo
    return b - lo


@njit(cache=True)
def _cnt_bucket(c):
    if c <= 0:
        return 0
    if c < 3:
        return 1
    if c < 10:
        return 2
    return 3


# tagger template ids
T_BIAS = 1
T_WORD = 10  # + offset in [-3, 3]
T_BIGRAM_L = 20
T_BIGRAM_R = 21
T_EQ_FWD = 30  # + d
T_EQ_BWD = 40
T_BI_FWD = 50
T_BI_BWD = 60
T_NB_L_FWD = 70  # left neighbor matches forward
T_NB_R_FWD = 80  # right neighbor matches forward
T_POS = 90
T_POS_END = 91
T_FREQ = 92
T_ANY_FWD = 93
T_LM_L = 94
T_LM_R = 95
T_LM_LR = 96
T_SURP = 97
T_SURP_NEXT = 98
T_CUT = 99
T_CUT_WORD = 100
T_CUT_N = 140
T_CLEAN = 141
T_CLEAN_N = 142
T_SPAN = 143
T_SPAN_N = 144
T_SPAN_WORD = 145
T_SPAN_TRI = 146

TAGGER_WIDTH = 1 + 7 + 2 + 6 * 6 + 4 + 14


@njit(cache=True)
def tagger_features(raw, mapped, freq, offsets, mask, table, keep, loo):
    """Dense (n_tokens, TAGGER_WIDTH) matrix of hashed feature ids, -1 = absent.

    With ``loo`` set, n-gram counts of each sentence's own kept tokens are
    discounted so training sentences cannot vouch for themselves.
    """
    n = raw.shape[0]
    out = np.full((n, TAGGER_WIDTH), -1, dtype=np.int64)
    zero = np.uint64(0)
    lm_mask = np.uint64(table.shape[0] - 1)
    total = np.int64(table[_slot(0, PAD, PAD, PAD, lm_mask)])
    no_own = np.empty(0, dtype=np.int64)
    for s in range(offsets.shape[0] - 1):
        lo = offsets[s]
        hi = offsets[s + 1]
        length = hi - lo
        if loo:
            own = _ngram_slots(_skeleton(raw, lo, hi, keep), lm_mask)
        else:
            own = no_own
        # padded surface: seq[j + 2] is token j, seq[length + 2] is EOS
        seq = np.empty(length + 3, dtype=np.uint64)
        seq[0] = BOS_ID
        seq[1] = BOS_ID
        for j in range(length):
            seq[j + 2] = raw[lo + j]
        seq[length + 2] = EOS_ID
        lp = np.zeros(length + 1, dtype=np.float64)
        cum_lp = np.zeros(length + 2, dtype=np.float64)
        unf = np.zeros(length + 1, dtype=np.int64)
        cum_unf = np.zeros(length + 2, dtype=np.int64)
        for j in range(length + 1):
            lp[j] = _logp(table, seq[j], seq[j + 1], seq[j + 2], own, total, lm_mask)
            cum_lp[j + 1] = cum_lp[j] + lp[j]
            if _count(table, _slot(2, seq[j + 1], seq[j + 2], PAD, lm_mask), own) <= 0:
                unf[j] = 1
            cum_unf[j + 1] = cum_unf[j] + unf[j]
        n_unf = cum_unf[length + 1]

        for i in range(length):
            row = lo + i
            c = 0
            out[row, c] = _feat(T_BIAS, zero, zero, mask)
            c += 1
            for off in range(-WINDOW, WINDOW + 1):
                j = i + off
                if j < 0:
                    v = BOS_ID
                elif j >= length:
                    v = EOS_ID
                else:
                    v = mapped[lo + j]
                out[row, c] = _feat(T_WORD + off + WINDOW, v, zero, mask)
                c += 1
            left = mapped[lo + i - 1] if i > 0 else BOS_ID
            right = mapped[lo + i + 1] if i + 1 < length else EOS_ID
            out[row, c] = _feat(T_BIGRAM_L, left, mapped[row], mask)
            c += 1
            out[row, c] = _feat(T_BIGRAM_R, mapped[row], right, mask)
            c += 1
            any_fwd = 0
            for d in range(1, MAX_DIST + 1):
                if i + d < length and raw[row] == raw[row + d]:
                    out[row, c] = _feat(T_EQ_FWD + d, zero, zero, mask)
                    any_fwd = d
                c += 1
                if i - d >= 0 and raw[row] == raw[row - d]:
                    out[row, c] = _feat(T_EQ_BWD + d, zero, zero, mask)
                c += 1
                if i + d + 1 < length and raw[row] == raw[row + d] and raw[row + 1] == raw[row + d + 1]:
                    out[row, c] = _feat(T_BI_FWD + d, zero, zero, mask)
                c += 1
                if i - d >= 0 and i + 1 < length and raw[row] == raw[row - d] and raw[row + 1] == raw[row - d + 1]:
                    out[row, c] = _feat(T_BI_BWD + d, zero, zero, mask)
                c += 1
                if i >= 1 and i - 1 + d < length and raw[row - 1] == raw[row - 1 + d]:
                    out[row, c] = _feat(T_NB_L_FWD + d, zero, zero, mask)
                c += 1
                if i + 1 + d < length and raw[row + 1] == raw[row + 1 + d]:
                    out[row, c] = _feat(T_NB_R_FWD + d, zero, zero, mask)
                c += 1
            out[row, c] = _feat(T_POS, np.uint64(_pos_bucket(i)), zero, mask)
            c += 1
            out[row, c] = _feat(T_POS_END, np.uint64(_pos_bucket(length - 1 - i)), zero, mask)
            c += 1
            out[row, c] = _feat(T_FREQ, np.uint64(freq[row]), zero, mask)
            c += 1
            out[row, c] = _feat(T_ANY_FWD, np.uint64(any_fwd), mapped[row], mask)
            c += 1

            # fluency of the bigrams around token i
            out[row, c] = _feat(T_LM_L, np.uint64(unf[i]), zero, mask)
            c += 1
            out[row, c] = _feat(T_LM_R, np.uint64(unf[i + 1]), zero, mask)
            c += 1
            out[row, c] = _feat(T_LM_LR, np.uint64(unf[i]), np.uint64(unf[i + 1] + 2 * min(n_unf, 3)), mask)
            c += 1
            out[row, c] = _feat(T_SURP, np.uint64(_bucket(lp[i], 1.5, -8, 0)), zero, mask)
            c += 1
            out[row, c] = _feat(T_SURP_NEXT, np.uint64(_bucket(lp[i + 1], 1.5, -8, 0)),
                                np.uint64(_bucket(lp[i], 1.5, -8, 0)), mask)
            c += 1

            # candidate cuts: contiguous spans [a, b] holding i, at most MAX_DIST long
            best = -1e30
            best_len = 0
            best_pos = 0
            n_good = 0
            clean_len = 0
            n_clean = 0
            span_best = -1
            span_len = 0
            span_pos = 0
            tri = 0
            n_full = 0
            for a in range(max(0, i - MAX_DIST + 1), i + 1):
                for b in range(i, min(length, a + MAX_DIST)):
                    # scores that change: tokens b+1 and b+2 (if present) get new contexts
                    gain = _logp(table, seq[a], seq[a + 1], seq[b + 3], own, total, lm_mask)
                    stop = b + 1
                    if b + 1 < length:
                        gain += _logp(table, seq[a + 1], seq[b + 3], seq[b + 4], own, total, lm_mask)
                        stop = b + 2
                    gain -= cum_lp[stop + 1] - cum_lp[a]
                    # normalise by the tokens removed
                    gain = gain / (b - a + 1)
                    if gain > 0.5:
                        n_good += 1
                    if gain > best:
                        best = gain
                        best_len = b - a + 1
                        if a == b:
                            best_pos = 1
                        elif i == a:
                            best_pos = 2
                        elif i == b:
                            best_pos = 3
                        else:
                            best_pos = 4
                    bridge_unf = 1 if _count(table, _slot(2, seq[a + 1], seq[b + 3], PAD, lm_mask), own) <= 0 else 0
                    after = n_unf - (cum_unf[b + 2] - cum_unf[a]) + bridge_unf
                    sc = 2 * (1 - bridge_unf) + unf[a] + unf[b + 1]
                    if sc == 4:
                        n_full += 1
                    if sc > span_best:
                        span_best = sc
                        span_len = b - a + 1
                        # do the trigrams across the seam exist as well?
                        tri = 0
                        if _count(table, _slot(3, seq[a], seq[a + 1], seq[b + 3], lm_mask), own) > 0:
                            tri += 1
                        if b + 1 < length and _count(table, _slot(3, seq[a + 1], seq[b + 3], seq[b + 4], lm_mask), own) > 0:
                            tri += 2
                        if a == b:
                            span_pos = 1
                        elif i == a:
                            span_pos = 2
                        elif i == b:
                            span_pos = 3
                        else:
                            span_pos = 4
                    if n_unf > 0 and after == 0:
                        n_clean += 1
                        if clean_len == 0 or b - a + 1 < clean_len:
                            clean_len = b - a + 1
            gb = np.uint64(_bucket(best, 0.75, -4, 8))
            out[row, c] = _feat(T_CUT, gb, np.uint64(best_len * 8 + best_pos), mask)
            c += 1
            out[row, c] = _feat(T_CUT_WORD, gb, mapped[row], mask)
            c += 1
            out[row, c] = _feat(T_CUT_N, np.uint64(min(n_good, 8)), zero, mask)
            c += 1
            out[row, c] = _feat(T_CLEAN, np.uint64(clean_len), np.uint64(min(n_unf, 4)), mask)
            c += 1
            out[row, c] = _feat(T_CLEAN_N, np.uint64(min(n_clean, 6)), zero, mask)
            c += 1
            out[row, c] = _feat(T_SPAN, np.uint64(span_best), np.uint64(span_len), mask)
            c += 1
            out[row, c] = _feat(T_SPAN_N, np.uint64(min(n_full, 4)), zero, mask)
            c += 1
            out[row, c] = _feat(T_SPAN_WORD, np.uint64(span_best), mapped[row], mask)
            c += 1
            out[row, c] = _feat(T_SPAN_TRI, np.uint64(span_best * 4 + tri), np.uint64(span_pos), mask)
            c += 1
    return out


# judge template ids
J_BIAS = 101
J_UNI = 102
J_BI = 103
J_TRI = 104
J_REP = 110  # + m: m-gram occurs twice inside the window
J_REP_ADJ = 120  # + m: m-gram immediately repeated
J_LEN = 130
REPEAT_WINDOW = 12


@njit(cache=True)
def _same(raw, a, b, m):
    for t in range(m):
        if raw[a + t] != raw[b + t]:
            return False
    return True


@njit(cache=True)
def judge_features(raw, mapped, offsets, mask):
    """CSR (indptr, indices) of hashed features, one row per sentence."""
    n_sent = offsets.shape[0] - 1
    n_tok = raw.shape[0]
    cap = 3 * (n_tok + 2 * n_sent) + n_sent * (2 * MAX_DIST + 2)
    indices = np.empty(cap, dtype=np.int64)
    indptr = np.zeros(n_sent + 1, dtype=np.int64)
    zero = np.uint64(0)
    p = 0
    for s in range(n_sent):
        lo = offsets[s]
        hi = offsets[s + 1]
        length = hi - lo
        indices[p] = _feat(J_BIAS, zero, zero, mask)
        p += 1
        # positions -1 and length act as BOS/EOS
        for i in range(-1, length + 1):
            if i < 0:
                a = BOS_ID
            elif i >= length:
                a = EOS_ID
            else:
                a = mapped[lo + i]
            if 0 <= i < length:
                indices[p] = _feat(J_UNI, a, zero, mask)
                p += 1
            if i + 1 <= length:
                b = mapped[lo + i + 1] if i + 1 < length else EOS_ID
                indices[p] = _feat(J_BI, a, b, mask)
                p += 1
                if i + 2 <= length:
                    c3 = mapped[lo + i + 2] if i + 2 < length else EOS_ID
                    indices[p] = _feat(J_TRI, _mix(a, b), c3, mask)
                    p += 1
        for m in range(1, MAX_DIST + 1):
            rep = False
            adj = False
            for i in range(0, length - m + 1):
                for j in range(i + 1, min(i + REPEAT_WINDOW, length - m + 1)):
                    if _same(raw, lo + i, lo + j, m):
                        rep = True
                        if j == i + m:
                            adj = True
                if adj:
                    break
            if rep:
                indices[p] = _feat(J_REP + m, zero, zero, mask)
                p += 1
            if adj:
                indices[p] = _feat(J_REP_ADJ + m, zero, zero, mask)
                p += 1
        indices[p] = _feat(J_LEN, np.uint64(_pos_bucket(length)), zero, mask)
        p += 1
        indptr[s + 1] = p
    return indptr, indices[:p].copy()


def dense_to_csr(feats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    keep = feats >= 0
    indptr = np.zeros(feats.shape[0] + 1, dtype=np.int64)
    np.cumsum(keep.sum(axis=1), out=indptr[1:])
    return indptr, feats[keep]


# second-layer templates: neighbour scores from the first layer
S_CTX = 150  # + offset
S_PAIR_L = 160
S_PAIR_R = 161
S_RUN_L = 162
S_RUN_R = 163
STACK_OFFSETS = 3
STACK_WIDTH = (2 * STACK_OFFSETS + 1) + 4


@njit(cache=True)
def _zb(z):
    return np.uint64(_bucket(z, 1.0, -6, 6))


@njit(cache=True)
def stack_features(z, offsets, mask):
    n = z.shape[0]
    out = np.full((n, STACK_WIDTH), -1, dtype=np.int64)
    zero = np.uint64(0)
    edge = np.uint64(99)
    for s in range(offsets.shape[0] - 1):
        lo = offsets[s]
        hi = offsets[s + 1]
        length = hi - lo
        for i in range(length):
            row = lo + i
            c = 0
            for off in range(-STACK_OFFSETS, STACK_OFFSETS + 1):
                j = i + off
                v = _zb(z[lo + j]) if 0 <= j < length else edge
                out[row, c] = _feat(S_CTX + off + STACK_OFFSETS, v, zero, mask)
                c += 1
            zl = _zb(z[row - 1]) if i > 0 else edge
            zr = _zb(z[row + 1]) if i + 1 < length else edge
            out[row, c] = _feat(S_PAIR_L, zl, _zb(z[row]), mask)
            c += 1
            out[row, c] = _feat(S_PAIR_R, _zb(z[row]), zr, mask)
            c += 1
            # length of the run of positive scores touching i on each side
            run = 0
            j = i - 1
            while j >= 0 and z[lo + j] > 0 and run < MAX_DIST:
                run += 1
                j -= 1
            out[row, c] = _feat(S_RUN_L, np.uint64(run), np.uint64(z[row] > 0), mask)
            c += 1
            run = 0
            j = i + 1
            while j < length and z[lo + j] > 0 and run < MAX_DIST:
                run += 1
                j += 1
            out[row, c] = _feat(S_RUN_R, np.uint64(run), np.uint64(z[row] > 0), mask)
            c += 1
    return out
