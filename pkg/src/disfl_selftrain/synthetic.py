"""A small generative English-like language for desk-scale experiments.

The real corpora (news text, Switchboard, Fisher) are licensed, so the
experiments and acceptance tests run on text drawn from a toy grammar with
agreement, tense, modifiers, prepositional phrases, relative and
complement clauses. Two registers share the grammar but weight it
differently:

``news``
    long noun phrases, names, third-person subjects; stands in for the
    fluent corpus the pseudo data is built from.
``speech``
    pronoun subjects, complement verbs, short clauses; stands in for
    unlabeled ASR output.

``simulate_speech`` adds human-like disfluencies to speech-register
sentences and keeps gold D/O labels plus a per-token category
(repetition / repair / restart) so the pipeline can be scored.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .corpus import DISFLUENT, FLUENT, Sentence, TaggedSentence
from .rng import stream

DET_SG = "the a this that every each my your his her our their one".split()
DET_PL = "the these those some many few my your our their all two several".split()
ADJ = (
    "big small old new good bad long short young red blue green dark bright "
    "quiet loud happy sad strange simple difficult easy early late local "
    "public private large little major common final recent modern cheap "
    "expensive warm cold clean busy empty full heavy light real whole free"
).split()
NOUNS = [
    ("man", "men"), ("woman", "women"), ("child", "children"), ("person", "people"),
    ("dog", "dogs"), ("cat", "cats"), ("car", "cars"), ("house", "houses"),
    ("city", "cities"), ("country", "countries"), ("company", "companies"),
    ("school", "schools"), ("teacher", "teachers"), ("student", "students"),
    ("book", "books"), ("letter", "letters"), ("report", "reports"),
    ("market", "markets"), ("price", "prices"), ("bank", "banks"),
    ("government", "governments"), ("law", "laws"), ("court", "courts"),
    ("team", "teams"), ("game", "games"), ("player", "players"),
    ("road", "roads"), ("river", "rivers"), ("tree", "trees"), ("garden", "gardens"),
    ("job", "jobs"), ("family", "families"), ("friend", "friends"),
    ("doctor", "doctors"), ("hospital", "hospitals"), ("plan", "plans"),
    ("idea", "ideas"), ("problem", "problems"), ("question", "questions"),
    ("answer", "answers"), ("story", "stories"), ("movie", "movies"),
    ("song", "songs"), ("computer", "computers"), ("phone", "phones"),
    ("meeting", "meetings"), ("office", "offices"), ("store", "stores"),
    ("farm", "farms"), ("village", "villages"), ("window", "windows"),
    ("door", "doors"), ("table", "tables"), ("kitchen", "kitchens"),
    ("week", "weeks"), ("year", "years"), ("month", "months"),
    ("program", "programs"), ("system", "systems"), ("voter", "voters"),
    ("leader", "leaders"), ("worker", "workers"), ("officer", "officers"),
    ("neighbor", "neighbors"), ("parent", "parents"), ("kid", "kids"),
    ("truck", "trucks"), ("boat", "boats"), ("bill", "bills"), ("tax", "taxes"),
]
NAMES = (
    "john mary peter susan david linda paul karen james nancy robert helen "
    "george alice frank carol smith johnson texas boston"
).split()
# (base, third-singular, past)
VERBS_T = [
    ("see", "sees", "saw"), ("like", "likes", "liked"), ("want", "wants", "wanted"),
    ("need", "needs", "needed"), ("buy", "buys", "bought"), ("sell", "sells", "sold"),
    ("find", "finds", "found"), ("make", "makes", "made"), ("take", "takes", "took"),
    ("give", "gives", "gave"), ("build", "builds", "built"), ("read", "reads", "read"),
    ("write", "writes", "wrote"), ("watch", "watches", "watched"),
    ("help", "helps", "helped"), ("call", "calls", "called"), ("visit", "visits", "visited"),
    ("support", "supports", "supported"), ("change", "changes", "changed"),
    ("open", "opens", "opened"), ("close", "closes", "closed"), ("pay", "pays", "paid"),
    ("lose", "loses", "lost"), ("keep", "keeps", "kept"), ("meet", "meets", "met"),
    ("follow", "follows", "followed"), ("raise", "raises", "raised"),
    ("cut", "cuts", "cut"), ("use", "uses", "used"), ("love", "loves", "loved"),
    ("hate", "hates", "hated"), ("drive", "drives", "drove"), ("fix", "fixes", "fixed"),
    ("clean", "cleans", "cleaned"), ("move", "moves", "moved"), ("hire", "hires", "hired"),
]
VERBS_I = [
    ("work", "works", "worked"), ("live", "lives", "lived"), ("sleep", "sleeps", "slept"),
    ("run", "runs", "ran"), ("walk", "walks", "walked"), ("talk", "talks", "talked"),
    ("wait", "waits", "waited"), ("arrive", "arrives", "arrived"),
    ("leave", "leaves", "left"), ("smile", "smiles", "smiled"), ("grow", "grows", "grew"),
    ("fall", "falls", "fell"), ("travel", "travels", "traveled"), ("vote", "votes", "voted"),
    ("stay", "stays", "stayed"), ("win", "wins", "won"), ("rise", "rises", "rose"),
    ("play", "plays", "played"), ("laugh", "laughs", "laughed"), ("agree", "agrees", "agreed"),
]
VERBS_C = [
    ("think", "thinks", "thought"), ("say", "says", "said"), ("know", "knows", "knew"),
    ("believe", "believes", "believed"), ("hope", "hopes", "hoped"),
    ("guess", "guesses", "guessed"), ("feel", "feels", "felt"), ("hear", "hears", "heard"),
]
ADV = (
    "really usually often never always sometimes quickly slowly probably "
    "actually finally certainly already still again soon"
).split()
PREP = "in on at with from near under about for after before without behind".split()
CONJ = "and but because so while when although".split()
MODAL = "can will should might must could would".split()
SUBJ_PRON = [("i", "1sg"), ("we", "pl"), ("you", "pl"), ("they", "pl"),
             ("he", "3sg"), ("she", "3sg"), ("it", "3sg")]
OBJ_PRON = "me us you them him her it".split()
TIME = "today yesterday now then there here".split()


def _zipf_pick(rng, items, s=1.0):
    # rank-weighted choice, first items most frequent
    weights = _zipf_cache.get((len(items), s))
    if weights is None:
        w = [1.0 / (r + 1) ** s for r in range(len(items))]
        tot = sum(w)
        acc, weights = 0.0, []
        for x in w:
            acc += x / tot
            weights.append(acc)
        _zipf_cache[(len(items), s)] = weights
    u = rng.random()
    lo, hi = 0, len(weights) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if weights[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    return items[lo]


_zipf_cache: dict = {}


@dataclass
class Register:
    name: str
    p_pronoun_subj: float
    p_name_subj: float
    p_adj: float
    p_pp: float
    p_rel: float
    p_comp: float
    p_modal: float
    p_adv: float
    p_conj: float
    p_time: float
    p_past: float


REGISTERS = {
    "news": Register("news", 0.15, 0.15, 0.45, 0.40, 0.15, 0.10, 0.15, 0.15, 0.20, 0.10, 0.55),
    "speech": Register("speech", 0.65, 0.05, 0.25, 0.25, 0.08, 0.30, 0.20, 0.30, 0.25, 0.25, 0.40),
}

# token categories used for repair substitution
CAT_FUNC = "func"


class Grammar:
    """Random sentence generator. Each token carries a category for repairs."""

    def __init__(self, register: str = "news"):
        self.reg = REGISTERS[register]

    def sentence(self, rng) -> List[Tuple[str, str]]:
        out: List[Tuple[str, str]] = []
        if rng.random() < self.reg.p_adv * 0.3:
            out.append((_zipf_pick(rng, ADV), "adv"))
        self._clause(rng, out, depth=0)
        if rng.random() < self.reg.p_conj:
            out.append((_zipf_pick(rng, CONJ), CAT_FUNC))
            self._clause(rng, out, depth=1)
        return out

    def _np(self, rng, out, number, depth, obj=False):
        r = self.reg
        n_adj = 0
        while rng.random() < r.p_adj / (n_adj + 1) and n_adj < 2:
            n_adj += 1
        det = _zipf_pick(rng, DET_SG if number == "sg" else DET_PL)
        out.append((det, "det"))
        for _ in range(n_adj):
            out.append((_zipf_pick(rng, ADJ), "adj"))
        noun = _zipf_pick(rng, NOUNS, 0.8)
        out.append((noun[0] if number == "sg" else noun[1], "noun"))
        if depth < 2 and rng.random() < r.p_pp * (0.5 if obj else 1.0):
            out.append((_zipf_pick(rng, PREP), "prep"))
            self._np(rng, out, "sg" if rng.random() < 0.6 else "pl", depth + 1, obj=True)
        if depth < 1 and rng.random() < r.p_rel:
            out.append(("that", CAT_FUNC))
            self._vp(rng, out, "3sg" if number == "sg" else "pl", depth + 1)

    def _subject(self, rng, out, depth) -> str:
        r = self.reg
        u = rng.random()
        if u < r.p_pronoun_subj:
            pron, person = _zipf_pick(rng, SUBJ_PRON, 0.6)
            out.append((pron, "pron"))
            return person
        if u < r.p_pronoun_subj + r.p_name_subj:
            out.append((_zipf_pick(rng, NAMES), "name"))
            return "3sg"
        number = "sg" if rng.random() < 0.6 else "pl"
        self._np(rng, out, number, depth)
        return "3sg" if number == "sg" else "pl"

    def _object(self, rng, out, depth):
        u = rng.random()
        if u < 0.15:
            out.append((_zipf_pick(rng, OBJ_PRON), "pron"))
        elif u < 0.22:
            out.append((_zipf_pick(rng, NAMES), "name"))
        else:
            self._np(rng, out, "sg" if rng.random() < 0.6 else "pl", depth + 1, obj=True)

    def _verb(self, rng, out, person, table, cat, tense):
        v = _zipf_pick(rng, table, 0.7)
        if tense == "base":
            out.append((v[0], cat))
        elif tense == "past":
            out.append((v[2], cat))
        else:
            out.append((v[1] if person == "3sg" else v[0], cat))

    def _vp(self, rng, out, person, depth):
        r = self.reg
        tense = "past" if rng.random() < r.p_past else "pres"
        if rng.random() < r.p_modal:
            out.append((_zipf_pick(rng, MODAL), "modal"))
            tense = "base"
        if rng.random() < r.p_adv:
            out.append((_zipf_pick(rng, ADV), "adv"))
        u = rng.random()
        if depth < 1 and u < r.p_comp:
            self._verb(rng, out, person, VERBS_C, "verb", tense)
            if rng.random() < 0.5:
                out.append(("that", CAT_FUNC))
            self._clause(rng, out, depth + 1)
            return
        if u < 0.65:
            self._verb(rng, out, person, VERBS_T, "verb", tense)
            self._object(rng, out, depth)
        else:
            self._verb(rng, out, person, VERBS_I, "verb", tense)
            if rng.random() < r.p_pp:
                out.append((_zipf_pick(rng, PREP), "prep"))
                self._np(rng, out, "sg" if rng.random() < 0.6 else "pl", depth + 1, obj=True)
        if rng.random() < r.p_time:
            out.append((_zipf_pick(rng, TIME), "time"))

    def _clause(self, rng, out, depth):
        person = self._subject(rng, out, depth)
        self._vp(rng, out, person, depth)


def _lexicon_by_category():
    verbs = set()
    for table in (VERBS_T, VERBS_I, VERBS_C):
        for forms in table:
            verbs.update(forms)
    return {
        "det": sorted(set(DET_SG) | set(DET_PL)),
        "adj": ADJ,
        "noun": sorted({n for pair in NOUNS for n in pair}),
        "name": NAMES,
        "pron": sorted({p for p, _ in SUBJ_PRON} | set(OBJ_PRON)),
        "verb": sorted(verbs),
        "adv": ADV,
        "prep": PREP,
        "modal": MODAL,
        "time": TIME,
    }


LEXICON = _lexicon_by_category()


def generate(n: int, seed: int, register: str = "news", min_len: int = 3, max_len: int = 30):
    """Generate n sentences as (token, category) lists."""
    g = Grammar(register)
    out = []
    i = 0
    while len(out) < n:
        rng = stream(seed, "synthetic", register, i)
        i += 1
        sent = g.sentence(rng)
        if min_len <= len(sent) <= max_len:
            out.append(sent)
    return out


def fluent_corpus(n: int, seed: int, register: str = "news") -> List[Sentence]:
    return [Sentence(tuple(t for t, _ in s)) for s in generate(n, seed, register)]


REPETITION_CAT = "repetition"
REPAIR_CAT = "repair"
RESTART_CAT = "restart"


@dataclass
class SpeechSample:
    gold: TaggedSentence
    source: Sentence
    categories: Tuple[Optional[str], ...]


def _substitute(rng, word, cat):
    pool = LEXICON.get(cat)
    if not pool or len(pool) < 2:
        return None
    for _ in range(10):
        w = pool[rng.randrange(len(pool))]
        if w != word:
            return w
    return None


def simulate_speech(
    n: int,
    seed: int,
    p_disfluent: float = 0.6,
    mix: Sequence[float] = (0.45, 0.35, 0.20),
    register: str = "speech",
) -> List[SpeechSample]:
    """Speech-register sentences with human-like disfluencies and gold labels.

    ``mix`` weights the three disfluency types: exact repetition, repair
    (the reparandum is the following phrase with one or two words swapped
    for same-category words, possibly cut short), and restart (an abandoned
    fragment of another sentence at a clause start). A disfluent sentence
    gets one or two of them. Reparanda are labeled D.
    """
    base = generate(n, seed, register)
    frags = generate(max(n // 4, 50), seed + 7919, register)
    out = []
    for i, sent in enumerate(base):
        rng = stream(seed, "speech", i)
        toks = [t for t, _ in sent]
        cats = [c for _, c in sent]
        labels = [FLUENT] * len(toks)
        kinds: List[Optional[str]] = [None] * len(toks)
        if rng.random() < p_disfluent:
            n_events = 1 if rng.random() < 0.7 else 2
            # candidate sites: sentence start, clause starts, after prepositions/verbs
            sites = [0] + [j for j in range(1, len(toks)) if cats[j - 1] in (CAT_FUNC, "prep", "verb")]
            picked = sorted(rng.sample(sites, min(n_events, len(sites))), reverse=True)
            for k in picked:
                u = rng.random()
                if u < mix[0]:
                    kind = REPETITION_CAT
                elif u < mix[0] + mix[1]:
                    kind = REPAIR_CAT
                else:
                    kind = RESTART_CAT
                if kind == RESTART_CAT:
                    frag = frags[rng.randrange(len(frags))]
                    m = rng.randint(1, min(4, len(frag)))
                    rep = [t for t, _ in frag[:m]]
                elif kind == REPETITION_CAT:
                    m = rng.choice((1, 1, 1, 2, 2, 3))
                    m = min(m, len(toks) - k)
                    rep = toks[k:k + m]
                else:
                    m = min(rng.randint(2, 4), len(toks) - k)
                    rep = list(toks[k:k + m])
                    swappable = [j for j in range(m) if cats[k + j] in LEXICON]
                    if not swappable:
                        kind = REPETITION_CAT
                    else:
                        for j in rng.sample(swappable, min(len(swappable), rng.randint(1, 2))):
                            w = _substitute(rng, rep[j], cats[k + j])
                            if w is not None:
                                rep[j] = w
                        # speakers often abandon the reparandum early
                        if m > 2 and rng.random() < 0.3:
                            rep = rep[: rng.randint(2, m - 1)]
                        if rep == toks[k:k + len(rep)]:
                            kind = REPETITION_CAT
                toks[k:k] = rep
                cats[k:k] = [CAT_FUNC] * len(rep)
                labels[k:k] = [DISFLUENT] * len(rep)
                kinds[k:k] = [kind] * len(rep)
        out.append(
            SpeechSample(
                TaggedSentence.build(toks, labels),
                Sentence(tuple(t for t, _ in sent)),
                tuple(kinds),
            )
        )
    return out
