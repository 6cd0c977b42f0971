"""Greedy autoregressive decoding from landmark sequences to text."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    END,
    FRAME_MAX,
    PAD,
    START,
    VOCAB,
    LandmarkSequence,
    TokenSequence,
    Vocabulary,
    detokenize,
    load_corpus,
    subsample_frames,
)
from .exceptions import ParameterError
from .metrics import write_pairs
from .numerics.tensor import no_grad


@dataclass(frozen=True)
class DecodeConfig:
    max_len: int = 64
    stop_on_end: bool = True

    def __post_init__(self):
        if self.max_len < 2:
            raise ParameterError(f"max_len must be >= 2, got {self.max_len}")


def _stack(samples: list[LandmarkSequence], frame_max: int):
    dim = samples[0].dim
    frames = np.zeros((len(samples), frame_max, dim), dtype=np.float32)
    mask = np.zeros((len(samples), frame_max), dtype=bool)
    for row, seq in enumerate(samples):
        seq = subsample_frames(seq, frame_max)
        frames[row, : seq.length] = seq.frames
        mask[row, : seq.length] = seq.frame_mask
    return frames, mask


def allowed_tokens(n_classes: int, vocab: Vocabulary = VOCAB) -> np.ndarray:
    """Ids a decoder may emit: END and real characters, never PAD/START or spare classes."""
    allowed = np.zeros(n_classes, dtype=bool)
    allowed[: len(vocab)] = True
    allowed[[PAD, START]] = False
    return allowed


def greedy_decode_batch(network, samples, config: DecodeConfig = DecodeConfig(), vocab: Vocabulary = VOCAB) -> list[tuple]:
    """Decode several samples at once; returns one id tuple per sample.

    The encoder runs once; each step appends the arg-max token (lowest id
    wins ties) until every row has emitted END or ``max_len`` is reached.
    """
    samples = list(samples)
    if not samples:
        return []
    frames, mask = _stack(samples, network.config.frame_max)
    batch = len(samples)
    with no_grad():
        memory = network.encode(frames, mask)
        state = network.start_decoding(memory, np.full(batch, START, dtype=np.int64))
        sequences = [[START] for _ in range(batch)]
        done = np.zeros(batch, dtype=bool)
        allowed = None
        length = 1
        while not done.all() and length < config.max_len:
            logits = network.decode_step(state)
            if allowed is None:
                allowed = allowed_tokens(logits.shape[-1], vocab)
            choice = np.where(allowed, logits, -np.inf).argmax(axis=-1)
            for row in range(batch):
                if not done[row]:
                    sequences[row].append(int(choice[row]))
                    if config.stop_on_end and choice[row] == END:
                        done[row] = True
            # finished rows keep feeding END so the batch stays rectangular
            feed = np.where(done, END, choice)
            network.advance(state, feed)
            length += 1
    return [tuple(seq) for seq in sequences]


def greedy_decode(network, sample: LandmarkSequence, config: DecodeConfig = DecodeConfig(), vocab: Vocabulary = VOCAB) -> TokenSequence:
    ids = greedy_decode_batch(network, [sample], config, vocab)[0]
    return TokenSequence(ids=ids, raw=detokenize(ids, vocab))


def decode_texts(network, samples, vocab: Vocabulary = VOCAB, config: DecodeConfig = DecodeConfig(), batch_size=64) -> list[str]:
    texts = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        texts.extend(detokenize(ids, vocab) for ids in greedy_decode_batch(network, chunk, config, vocab))
    return texts


def translate(network, corpus_path, out_path, vocab: Vocabulary = VOCAB, expected_dim=None, config: DecodeConfig | None = None) -> int:
    """Decode every sample of a corpus file into ``id TAB reference TAB hypothesis`` lines."""
    dim = expected_dim or network.config.input_dim
    frame_max = getattr(network.config, "frame_max", FRAME_MAX)
    config = config or DecodeConfig(max_len=network.config.target_max)
    try:
        samples = load_corpus(corpus_path, dim, frame_max=frame_max, vocab=vocab)
    except OSError as exc:
        raise OSError(f"cannot read corpus {corpus_path}: {exc.strerror or exc}") from exc
    hyps = decode_texts(network, [s.landmarks for s in samples], vocab, config)
    try:
        write_pairs(out_path, [(s.landmarks.id, s.phrase, h) for s, h in zip(samples, hyps)])
    except OSError as exc:
        raise OSError(f"cannot write translations to {out_path}: {exc.strerror or exc}") from exc
    return len(samples)
