"""Training loop, per-epoch validation and evaluation reports."""

from __future__ import annotations

import csv
import logging
import math
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .data import PAD, VOCAB, Vocabulary, batchify
from .decoding import DecodeConfig, decode_texts
from .exceptions import ConfigurationError, NumericError
from .metrics import DEFAULT_BUCKET_EDGES, evaluate_pairs, levenshtein
from .numerics.functional import cross_entropy
from .numerics.optim import Adam
from .numerics.rng import spawn
from .numerics.tensor import no_grad

log = logging.getLogger(__name__)

RECORD_FIELDS = ("epoch", "train_loss", "val_loss", "val_levenshtein", "seconds")


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    eval_every: int = 1
    clip_norm: float | None = None
    checkpoint_dir: str | None = None

    def validate(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 0:
            raise ConfigurationError(f"eval_every must be >= 0, got {self.eval_every}")
        return self


@dataclass
class TrainRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_levenshtein: float
    seconds: float


def _teacher_forced(batch):
    """Decoder inputs/targets trimmed to the longest sequence in the batch."""
    longest = int(batch.lengths.max())
    return batch.tokens[:, : longest - 1], batch.tokens[:, 1:longest]


def batch_loss(network, batch, training=False, rng=None):
    inputs, targets = _teacher_forced(batch)
    logits = network(batch.frames, batch.frame_mask, inputs, training=training, rng=rng)
    return cross_entropy(logits, targets, PAD), int((targets != PAD).sum())


def dataset_loss(network, samples, batch_size=64, vocab: Vocabulary = VOCAB) -> float:
    """Token-weighted teacher-forced cross-entropy, no dropout."""
    cfg = network.config
    total = count = 0
    with no_grad():
        for batch in batchify(samples, batch_size, cfg.frame_max, cfg.target_max, PAD, vocab):
            loss, n = batch_loss(network, batch)
            total += float(loss.data) * n
            count += n
    return total / count if count else math.nan


def mean_levenshtein(network, samples, vocab: Vocabulary = VOCAB, batch_size=64) -> float:
    hyps = decode_texts(network, [s.landmarks for s in samples], vocab,
                        DecodeConfig(max_len=network.config.target_max), batch_size)
    return sum(levenshtein(s.phrase, h) for s, h in zip(samples, hyps)) / len(samples)


def _save_last_good(state, config: TrainConfig):
    directory = Path(config.checkpoint_dir or tempfile.mkdtemp(prefix="fingerspell-"))
    directory.mkdir(parents=True, exist_ok=True)
    return save_checkpoint(state, None, directory / "last_good.sltc")


def train(network, train_samples, val_samples, config: TrainConfig, vocab: Vocabulary = VOCAB, callback=None):
    """Fit ``network`` in place with Adam on teacher-forced cross-entropy.

    Returns ``(network, records)`` with one :class:`TrainRecord` per epoch.
    ``callback(record)`` is invoked after each epoch when given.
    """
    config.validate()
    if not train_samples:
        raise ConfigurationError("training split is empty")
    cfg = network.config
    streams = spawn(config.seed, "shuffle", "dropout")
    optimizer = Adam(network.named_parameters(), lr=config.lr)
    records = []
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        last_good = {name: p.data.copy() for name, p in optimizer.params.items()}
        order = streams["shuffle"].permutation(len(train_samples))
        shuffled = [train_samples[i] for i in order]
        total = count = 0
        for batch in batchify(shuffled, config.batch_size, cfg.frame_max, cfg.target_max, PAD, vocab):
            loss, n = batch_loss(network, batch, training=True, rng=streams["dropout"])
            value = float(loss.data)
            if not math.isfinite(value):
                path = _save_last_good(last_good, config)
                raise NumericError(f"non-finite training loss at epoch {epoch}", checkpoint_path=path)
            optimizer.zero_grad()
            loss.backward()
            try:
                optimizer.step(config.clip_norm)
            except NumericError as exc:
                path = _save_last_good(last_good, config)
                raise NumericError(f"epoch {epoch}: {exc}", checkpoint_path=path) from None
            total += value * n
            count += n
        train_loss = total / count
        val_loss = val_lev = math.nan
        if val_samples:
            val_loss = dataset_loss(network, val_samples, config.batch_size, vocab)
            if config.eval_every and (epoch % config.eval_every == 0 or epoch == config.epochs):
                val_lev = mean_levenshtein(network, val_samples, vocab, config.batch_size)
        record = TrainRecord(epoch, train_loss, val_loss, val_lev, time.perf_counter() - started)
        records.append(record)
        log.debug("epoch %d train_loss=%.4f val_loss=%.4f val_lev=%.3f (%.1fs)",
                 epoch, train_loss, val_loss, val_lev, record.seconds)
        if callback is not None:
            callback(record)
    return network, records


def evaluate(network, samples, vocab: Vocabulary = VOCAB, decoder=None, edges=DEFAULT_BUCKET_EDGES):
    """Greedy-decode ``samples`` and score them against their phrases.

    ``decoder`` may replace greedy decoding: a callable mapping a list of
    landmark sequences to a list of strings.
    """
    if not samples:
        raise ConfigurationError("cannot evaluate an empty dataset")
    landmarks = [s.landmarks for s in samples]
    if decoder is None:
        hyps = decode_texts(network, landmarks, vocab, DecodeConfig(max_len=network.config.target_max))
    else:
        hyps = list(decoder(landmarks))
    return evaluate_pairs(
        [(s.landmarks.id, s.phrase, h) for s, h in zip(samples, hyps)], edges=edges
    )


# -- record CSVs -------------------------------------------------------------------

def _cell(value):
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([_cell(v) for v in asdict(r).values()])


def read_records(path) -> list[TrainRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                TrainRecord(
                    epoch=int(row["epoch"]),
                    train_loss=float(row["train_loss"] or "nan"),
                    val_loss=float(row["val_loss"] or "nan"),
                    val_levenshtein=float(row["val_levenshtein"] or "nan"),
                    seconds=float(row["seconds"] or "nan"),
                )
            )
    return records


def records_equal(a, b) -> bool:
    """Compare two record lists ignoring wall-clock time."""
    strip = lambda rs: [(r.epoch, r.train_loss, r.val_loss, r.val_levenshtein) for r in rs]  # noqa: E731
    return np.array_equal(np.array(strip(a), dtype=float), np.array(strip(b), dtype=float), equal_nan=True)
