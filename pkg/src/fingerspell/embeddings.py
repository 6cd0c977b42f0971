"""Source and target embeddings.

The landmark stack projects raw frame features to the model width, applies
three stride-2 convolutions (each halving the time axis) and adds a learned
positional table. The residual-LSTM block is an optional extra stage on top.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError, DimensionError, LengthError
from .numerics import functional as F
from .numerics.layers import LSTM, Conv1d, Embedding, Linear, Module
from .numerics.tensor import Tensor

CONV_KERNEL, CONV_STRIDE, CONV_PADDING = 11, 2, 5
N_CONV = 3


def embedded_length(frames: int) -> int:
    """Time steps left after the three stride-2 convolutions."""
    for _ in range(N_CONV):
        frames = (frames + 2 * CONV_PADDING - CONV_KERNEL) // CONV_STRIDE + 1
    return frames


def downsample_mask(mask) -> np.ndarray:
    """Position t' stays valid iff any frame in its stride-2 pair is valid, three times over."""
    mask = np.asarray(mask, dtype=bool)
    for _ in range(N_CONV):
        if mask.shape[-1] % 2:
            mask = np.concatenate([mask, np.zeros(mask.shape[:-1] + (1,), dtype=bool)], axis=-1)
        mask = mask[..., 0::2] | mask[..., 1::2]
    return mask


class LandmarkEmbedding(Module):
    def __init__(self, input_dim, width, rng, max_positions=100):
        self.input_dim = input_dim
        self.width = width
        self.projection = Linear(input_dim, width, rng)
        self.convs = [
            Conv1d(width, width, CONV_KERNEL, rng, stride=CONV_STRIDE, padding=CONV_PADDING)
            for _ in range(N_CONV)
        ]
        self.positions = Embedding(max_positions, width, rng)

    @property
    def max_positions(self):
        return self.positions.weight.shape[0]

    def forward(self, frames, frame_mask):
        """``frames`` [B, T, D], ``frame_mask`` [B, T] -> ([B, T', C], mask' [B, T'])."""
        frames = np.asarray(frames.data if isinstance(frames, Tensor) else frames)
        if frames.ndim == 2:
            frames, frame_mask = frames[None], np.asarray(frame_mask)[None]
        if frames.shape[-1] != self.input_dim:
            raise DimensionError(f"frame width {frames.shape[-1]} != embedding input {self.input_dim}")
        t_out = embedded_length(frames.shape[1])
        if t_out > self.max_positions:
            raise ConfigurationError(
                f"{frames.shape[1]} frames embed to {t_out} positions but the table holds {self.max_positions}"
            )
        mask = np.asarray(frame_mask, dtype=bool)
        # padded frames carry no signal whatever values they hold
        x = Tensor(np.where(mask[..., None], frames, 0).astype(self.projection.weight.dtype))
        h = self.projection(x)
        for conv in self.convs:
            h = F.relu(conv(h))
        h = h + self.positions.weight[:t_out]
        return h, downsample_mask(mask)


class TokenEmbedding(Module):
    """Token lookup plus a learned positional table."""

    def __init__(self, vocab_size, width, rng, max_len=64):
        self.tokens = Embedding(vocab_size, width, rng)
        self.positions = Embedding(max_len, width, rng)

    @property
    def max_len(self):
        return self.positions.weight.shape[0]

    def forward(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        length = ids.shape[-1]
        if length > self.max_len:
            raise LengthError(f"{length} target positions exceed the positional table of {self.max_len}")
        return self.tokens(ids) + self.positions.weight[:length]


class ResidualLSTM(Module):
    """``h + dense2(relu(dense1(lstm(h))))`` with matching in/out widths."""

    def __init__(self, width, rng):
        self.width = width
        self.lstm = LSTM(width, width, rng)
        self.dense1 = Linear(width, width, rng)
        self.dense2 = Linear(width, width, rng)

    def forward(self, h):
        if h.shape[-1] != self.width:
            raise DimensionError(f"residual block width {self.width} != input width {h.shape[-1]}")
        inner, _ = self.lstm(h)
        return h + self.dense2(F.relu(self.dense1(inner)))


def landmark_embed(frames, frame_mask, params: LandmarkEmbedding):
    return params(frames, frame_mask)


def token_embed(ids, params: TokenEmbedding):
    return params(ids)


def residual_lstm_embed(h, params: ResidualLSTM):
    return params(h)
