"""Fingerspelling translation from hand-landmark sequences to text.

Three encoder-decoder models (LSTM Seq2Seq, Transformer, and a Transformer
with a residual LSTM block in its landmark embedding) built on a small
numpy autodiff engine, plus BLEU/WER/CER evaluation and a CLI.
"""

from ._version import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    VOCAB,
    Batch,
    LandmarkSequence,
    Sample,
    SplitSpec,
    TokenSequence,
    Vocabulary,
    batchify,
    detokenize,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split,
    tokenize,
)
from .decoding import DecodeConfig, greedy_decode, translate
from .estimators import Seq2SeqTranslator, TransformerTranslator, load_translator, make_translator
from .metrics import MetricsReport, bleu, cer, evaluate_pairs, levenshtein, wer
from .models import build_network, count_parameters
from .training import TrainConfig, TrainRecord, evaluate, train

__all__ = [
    "__version__",
    "VOCAB",
    "Batch",
    "DecodeConfig",
    "LandmarkSequence",
    "MetricsReport",
    "Sample",
    "Seq2SeqTranslator",
    "SplitSpec",
    "TokenSequence",
    "TrainConfig",
    "TrainRecord",
    "TransformerTranslator",
    "Vocabulary",
    "batchify",
    "bleu",
    "build_network",
    "cer",
    "count_parameters",
    "detokenize",
    "evaluate",
    "evaluate_pairs",
    "generate_synthetic",
    "greedy_decode",
    "levenshtein",
    "load_checkpoint",
    "load_corpus",
    "load_translator",
    "make_translator",
    "save_checkpoint",
    "save_corpus",
    "split",
    "tokenize",
    "train",
    "translate",
    "wer",
]
