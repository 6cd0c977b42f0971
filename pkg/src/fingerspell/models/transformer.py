"""Encoder-decoder Transformer over landmark embeddings, with an optional
residual-LSTM stage between the landmark embedding and the encoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..embeddings import LandmarkEmbedding, ResidualLSTM, TokenEmbedding, embedded_length
from ..exceptions import ConfigurationError
from ..numerics import functional as F
from ..numerics.layers import LayerNorm, Linear, Module
from ..numerics.rng import make_rng
from ..numerics.tensor import Tensor
from .attention import MultiHeadAttention, causal_mask, key_padding_mask


@dataclass
class TransformerConfig:
    num_hid: int = 100
    heads: int = 4
    ff: int = 40
    frame_max: int = 128
    target_max: int = 64
    enc_layers: int = 5
    dec_layers: int = 1
    classes: int = 62
    dropout_p: float = 0.1
    input_dim: int = 126
    max_positions: int = 100
    residual_lstm: bool = False

    def validate(self):
        if self.num_hid % self.heads:
            raise ConfigurationError(f"num_hid {self.num_hid} must be divisible by heads {self.heads}")
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ConfigurationError("encoder and decoder need at least one layer each")
        if not 0 <= self.dropout_p < 1:
            raise ConfigurationError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if embedded_length(self.frame_max) > self.max_positions:
            raise ConfigurationError(
                f"frame_max {self.frame_max} embeds to {embedded_length(self.frame_max)} positions "
                f"> max_positions {self.max_positions}"
            )
        return self

    def to_dict(self):
        return asdict(self)


class FeedForward(Module):
    def __init__(self, width, hidden, rng):
        self.inner = Linear(width, hidden, rng)
        self.outer = Linear(hidden, width, rng)

    def forward(self, x):
        return self.outer(F.relu(self.inner(x)))


class EncoderLayer(Module):
    def __init__(self, cfg, rng):
        self.attention = MultiHeadAttention(cfg.num_hid, cfg.heads, rng)
        self.norm1 = LayerNorm(cfg.num_hid)
        self.ffn = FeedForward(cfg.num_hid, cfg.ff, rng)
        self.norm2 = LayerNorm(cfg.num_hid)
        self.dropout_p = cfg.dropout_p

    def forward(self, x, key_mask, training=False, rng=None):
        attended = F.dropout(self.attention(x, x, x, key_mask), self.dropout_p, training, rng)
        x = self.norm1(x + attended)
        return self.norm2(x + F.dropout(self.ffn(x), self.dropout_p, training, rng))


class DecoderLayer(Module):
    def __init__(self, cfg, rng):
        self.self_attention = MultiHeadAttention(cfg.num_hid, cfg.heads, rng)
        self.norm1 = LayerNorm(cfg.num_hid)
        self.cross_attention = MultiHeadAttention(cfg.num_hid, cfg.heads, rng)
        self.norm2 = LayerNorm(cfg.num_hid)
        self.ffn = FeedForward(cfg.num_hid, cfg.ff, rng)
        self.norm3 = LayerNorm(cfg.num_hid)
        self.dropout_p = cfg.dropout_p

    def forward(self, y, memory, memory_mask, training=False, rng=None):
        p = self.dropout_p
        mask = causal_mask(y.shape[1])[None]
        y = self.norm1(y + F.dropout(self.self_attention(y, y, y, mask), p, training, rng))
        crossed = self.cross_attention(y, memory, memory, key_padding_mask(memory_mask))
        y = self.norm2(y + F.dropout(crossed, p, training, rng))
        return self.norm3(y + F.dropout(self.ffn(y), p, training, rng))


class Memory:
    """Encoder output reused across decoding steps."""

    def __init__(self, states, mask):
        self.states = states
        self.mask = mask


class TransformerNet(Module):
    kind = "transformer"

    def __init__(self, config: TransformerConfig, seed=0):
        self.config = config.validate()
        rng = make_rng(seed)
        c = config.num_hid
        self.source = LandmarkEmbedding(config.input_dim, c, rng, config.max_positions)
        self.residual = ResidualLSTM(c, rng) if config.residual_lstm else None
        self.encoder = [EncoderLayer(config, rng) for _ in range(config.enc_layers)]
        self.target = TokenEmbedding(config.classes, c, rng, config.target_max)
        self.decoder = [DecoderLayer(config, rng) for _ in range(config.dec_layers)]
        self.classifier = Linear(c, config.classes, rng)

    def encode(self, frames, frame_mask, training=False, rng=None) -> Memory:
        h, mask = self.source(frames, frame_mask)
        if self.residual is not None:
            h = self.residual(h)
        for layer in self.encoder:
            h = layer(h, key_padding_mask(mask), training, rng)
        return Memory(h, mask)

    def decode(self, memory: Memory, ids, training=False, rng=None) -> Tensor:
        """Logits [B, U, classes] for decoder inputs ``ids`` [B, U]."""
        y = self.target(ids)
        for layer in self.decoder:
            y = layer(y, memory.states, memory.mask, training, rng)
        return self.classifier(y)

    def forward(self, frames, frame_mask, ids, training=False, rng=None) -> Tensor:
        memory = self.encode(frames, frame_mask, training, rng)
        return self.decode(memory, ids, training, rng)

    # incremental interface used by greedy decoding
    def start_decoding(self, memory: Memory, start_ids):
        return {"memory": memory, "prefix": np.asarray(start_ids, dtype=np.int64)[:, None]}

    def decode_step(self, state):
        """Logits [B, classes] for the position after the current prefix."""
        logits = self.decode(state["memory"], state["prefix"])
        return logits.data[:, -1]

    def advance(self, state, next_ids):
        state["prefix"] = np.concatenate([state["prefix"], np.asarray(next_ids)[:, None]], axis=1)
        return state
