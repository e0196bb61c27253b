"""Disfluency detection without annotated data.

Pseudo-labelled training data comes from perturbing fluent text; a
grammaticality judge filters the tagger's own labels on unlabelled speech
transcripts, and students are repeatedly fine-tuned on what survives.
"""
from .corpus import JudgedSentence, NormalizationOptions, Sentence, TaggedSentence, normalize
from .evaluate import EvalReport, score, score_by_category
from .judge import JudgeModel, classify, train_judge
from .linear import TrainConfig
from .perturb import NgramSampler, gen_disfluency_corpus, gen_judge_corpus, strip_D
from .selftrain import LoopConfig, LoopState, run_pipeline, sample_pool, select_sentences
from .tagger import TaggerModel, predict, train

__all__ = [
    "EvalReport", "JudgeModel", "JudgedSentence", "LoopConfig", "LoopState", "NgramSampler",
    "NormalizationOptions", "Sentence", "TaggedSentence", "TaggerModel", "TrainConfig", "classify",
    "gen_disfluency_corpus", "gen_judge_corpus", "normalize", "predict", "run_pipeline", "sample_pool",
    "score", "score_by_category", "select_sentences", "strip_D", "train", "train_judge",
]
__version__ = "0.1.0"
