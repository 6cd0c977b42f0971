"""scikit-learn style wrappers around the translation networks.

``X`` is a list of landmark sequences (``LandmarkSequence`` objects or
[T, D] arrays) and ``y`` a list of phrases::

    model = TransformerTranslator(num_hid=64, enc_layers=2, epochs=20)
    model.fit(X_train, y_train)
    model.predict(X_test)        # -> list of strings
    model.score(X_test, y_test)  # -> corpus BLEU-1
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .checkpoint import load_checkpoint, save_checkpoint
from .data import VOCAB, LandmarkSequence, Sample, Vocabulary
from .decoding import DecodeConfig, decode_texts
from .exceptions import ParameterError
from .metrics import evaluate_pairs
from .models import build_network, network_kind
from .training import TrainConfig, train
from ._version import __version__


def check_landmarks(X, n_features=None) -> list[LandmarkSequence]:
    """Coerce ``X`` to landmark sequences and check their feature width."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ParameterError("X must be a list of [T, D] sequences, not a single 2-D array")
    sequences = []
    for i, item in enumerate(X):
        if isinstance(item, Sample):
            item = item.landmarks
        if not isinstance(item, LandmarkSequence):
            item = LandmarkSequence(f"sample-{i:05d}", np.asarray(item, dtype=np.float32))
        if n_features is not None and item.dim != n_features:
            raise ParameterError(f"sample {item.id!r} has {item.dim} features, expected {n_features}")
        sequences.append(item)
    if not sequences:
        raise ParameterError("X is empty")
    return sequences


def check_phrases(y, n_samples, vocab: Vocabulary = VOCAB) -> list[str]:
    phrases = [str(p) for p in y]
    if len(phrases) != n_samples:
        raise ParameterError(f"X has {n_samples} samples but y has {len(phrases)}")
    for phrase in phrases:
        vocab.check_phrase(phrase)
    return phrases


def check_is_fitted(estimator):
    if getattr(estimator, "network_", None) is None:
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first")


class BaseTranslator(BaseEstimator):
    _model_kind = None
    _network_keys: tuple = ()

    def _network_kind(self):
        return self._model_kind

    def _network_config(self, n_features):
        config = {key: getattr(self, key) for key in self._network_keys}
        config["input_dim"] = n_features
        return config

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed,
            eval_every=self.eval_every,
            clip_norm=self.clip_norm,
        )

    def _init_network(self, n_features):
        self.n_features_in_ = n_features
        self.network_ = build_network(self._network_kind(), self._network_config(n_features), seed=self.seed)
        return self.network_

    def fit(self, X, y, X_val=None, y_val=None, callback=None):
        X = check_landmarks(X)
        y = check_phrases(y, len(X))
        train_set = [Sample(s, p) for s, p in zip(X, y)]
        val_set = []
        if X_val is not None:
            Xv = check_landmarks(X_val, X[0].dim)
            val_set = [Sample(s, p) for s, p in zip(Xv, check_phrases(y_val, len(Xv)))]
        network = self._init_network(X[0].dim)
        _, self.history_ = train(network, train_set, val_set, self._train_config(), callback=callback)
        return self

    def predict(self, X) -> list[str]:
        check_is_fitted(self)
        X = check_landmarks(X, self.n_features_in_)
        config = DecodeConfig(max_len=self.network_.config.target_max)
        return decode_texts(self.network_, X, VOCAB, config, self.batch_size)

    def evaluate(self, X, y):
        """Full metrics report (BLEU-1, WER, CER, per-sample rows, buckets)."""
        X = check_landmarks(X, getattr(self, "n_features_in_", None))
        y = check_phrases(y, len(X))
        hyps = self.predict(X)
        return evaluate_pairs([(s.id, ref, hyp) for s, ref, hyp in zip(X, y, hyps)])

    def score(self, X, y) -> float:
        return self.evaluate(X, y).bleu

    # -- persistence --------------------------------------------------------
    def save(self, path):
        check_is_fitted(self)
        meta = {
            "model": network_kind(self.network_),
            "estimator": type(self).__name__,
            "params": self.get_params(),
            "n_features_in": self.n_features_in_,
            "network_config": self.network_.config.to_dict(),
            "vocab": VOCAB.chars,
            "version": __version__,
        }
        return save_checkpoint(self.network_.named_parameters(), meta, path)


class TransformerTranslator(BaseTranslator):
    """Landmark embedding -> Transformer encoder -> causal Transformer decoder.

    With ``residual_lstm=True`` a residual LSTM block (one LSTM and two
    dense layers around a shortcut) refines the landmark embedding before
    the encoder.
    """

    _network_keys = (
        "num_hid", "heads", "ff", "frame_max", "target_max",
        "enc_layers", "dec_layers", "classes", "max_positions",
    )

    def __init__(
        self,
        num_hid=100,
        heads=4,
        ff=40,
        enc_layers=5,
        dec_layers=1,
        frame_max=128,
        target_max=64,
        classes=62,
        max_positions=100,
        dropout=0.1,
        residual_lstm=False,
        epochs=50,
        batch_size=64,
        lr=1e-3,
        eval_every=1,
        clip_norm=None,
        seed=0,
    ):
        self.num_hid = num_hid
        self.heads = heads
        self.ff = ff
        self.enc_layers = enc_layers
        self.dec_layers = dec_layers
        self.frame_max = frame_max
        self.target_max = target_max
        self.classes = classes
        self.max_positions = max_positions
        self.dropout = dropout
        self.residual_lstm = residual_lstm
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.eval_every = eval_every
        self.clip_norm = clip_norm
        self.seed = seed

    def _network_kind(self):
        return "transformer-rlstm" if self.residual_lstm else "transformer"

    def _network_config(self, n_features):
        config = super()._network_config(n_features)
        config["dropout_p"] = self.dropout
        return config


class Seq2SeqTranslator(BaseTranslator):
    """Two-layer LSTM encoder-decoder; the decoder starts from the encoder's final states."""

    _model_kind = "seq2seq"
    _network_keys = (
        "enc_hidden", "dec_hidden", "layers", "dropout", "embed_dim", "classes",
        "source_width", "frame_max", "target_max", "max_positions",
    )

    def __init__(
        self,
        enc_hidden=1024,
        dec_hidden=1024,
        layers=2,
        dropout=0.5,
        embed_dim=62,
        source_width=64,
        frame_max=128,
        target_max=64,
        classes=62,
        max_positions=100,
        epochs=50,
        batch_size=64,
        lr=1e-3,
        eval_every=1,
        clip_norm=None,
        seed=0,
    ):
        self.enc_hidden = enc_hidden
        self.dec_hidden = dec_hidden
        self.layers = layers
        self.dropout = dropout
        self.embed_dim = embed_dim
        self.source_width = source_width
        self.frame_max = frame_max
        self.target_max = target_max
        self.classes = classes
        self.max_positions = max_positions
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.eval_every = eval_every
        self.clip_norm = clip_norm
        self.seed = seed


def make_translator(model: str, **params) -> BaseTranslator:
    """Build an unfitted estimator from a CLI model name."""
    if model == "seq2seq":
        return Seq2SeqTranslator(**params)
    if model in ("transformer", "transformer-rlstm"):
        return TransformerTranslator(residual_lstm=model == "transformer-rlstm", **params)
    raise ParameterError(f"unknown model {model!r}")


def load_translator(path) -> BaseTranslator:
    """Rebuild a fitted estimator from a checkpoint and its metadata sidecar."""
    params, meta = load_checkpoint(path)
    if meta is None:
        raise ParameterError(f"{path}: no metadata sidecar found next to the checkpoint")
    if meta.get("vocab", VOCAB.chars) != VOCAB.chars:
        raise ParameterError(f"{path}: checkpoint was trained with a different vocabulary")
    cls = {"TransformerTranslator": TransformerTranslator, "Seq2SeqTranslator": Seq2SeqTranslator}[meta["estimator"]]
    estimator = cls(**meta["params"])
    network = estimator._init_network(meta["n_features_in"])
    network.load_state_dict(params)
    estimator.history_ = []
    return estimator
