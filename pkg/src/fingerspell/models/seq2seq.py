"""LSTM encoder-decoder: the decoder starts from the encoder's final states."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..embeddings import LandmarkEmbedding, embedded_length
from ..exceptions import ConfigurationError
from ..numerics import functional as F
from ..numerics.layers import LSTM, Embedding, Linear, Module
from ..numerics.rng import make_rng
from ..numerics.tensor import Tensor, no_grad


@dataclass
class Seq2SeqConfig:
    enc_hidden: int = 1024
    dec_hidden: int = 1024
    layers: int = 2
    dropout: float = 0.5
    embed_dim: int = 62
    classes: int = 62
    source_width: int = 64
    frame_max: int = 128
    target_max: int = 64
    input_dim: int = 126
    max_positions: int = 100

    def validate(self):
        if self.layers < 1:
            raise ConfigurationError("layers must be >= 1")
        if self.enc_hidden != self.dec_hidden:
            raise ConfigurationError(
                f"decoder starts from encoder states: enc_hidden {self.enc_hidden} != dec_hidden {self.dec_hidden}"
            )
        if not 0 <= self.dropout < 1:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if embedded_length(self.frame_max) > self.max_positions:
            raise ConfigurationError(f"frame_max {self.frame_max} needs more than {self.max_positions} positions")
        return self

    def to_dict(self):
        return asdict(self)


class Seq2SeqNet(Module):
    kind = "seq2seq"

    def __init__(self, config: Seq2SeqConfig, seed=0):
        self.config = config.validate()
        rng = make_rng(seed)
        self.source = LandmarkEmbedding(config.input_dim, config.source_width, rng, config.max_positions)
        self.encoder = LSTM(config.source_width, config.enc_hidden, rng, config.layers, config.dropout)
        self.target = Embedding(config.classes, config.embed_dim, rng)
        self.decoder = LSTM(config.embed_dim, config.dec_hidden, rng, config.layers, config.dropout)
        self.classifier = Linear(config.dec_hidden, config.classes, rng)

    def encode(self, frames, frame_mask, training=False, rng=None):
        """Final (h, c) per encoder layer, taken at each sample's last valid step."""
        h, mask = self.source(frames, frame_mask)
        h = F.dropout(h, self.config.dropout, training, rng)
        _, finals = self.encoder(h, mask=mask, training=training, rng=rng)
        return finals

    def decode(self, memory, ids, training=False, rng=None) -> Tensor:
        emb = F.dropout(self.target(ids), self.config.dropout, training, rng)
        out, _ = self.decoder(emb, state=memory, training=training, rng=rng)
        return self.classifier(out)

    def forward(self, frames, frame_mask, ids, training=False, rng=None) -> Tensor:
        return self.decode(self.encode(frames, frame_mask, training, rng), ids, training, rng)

    def start_decoding(self, memory, start_ids):
        return {"state": memory, "last": np.asarray(start_ids, dtype=np.int64)}

    def decode_step(self, state):
        with no_grad():
            emb = self.target(state["last"][:, None])
            out, finals = self.decoder(emb, state=state["state"])
        state["pending"] = finals
        return self.classifier(out).data[:, -1]

    def advance(self, state, next_ids):
        state["state"] = state.pop("pending")
        state["last"] = np.asarray(next_ids, dtype=np.int64)
        return state
