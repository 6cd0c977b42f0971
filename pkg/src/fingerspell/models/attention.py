"""Scaled dot-product multi-head attention."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import DimensionError, MaskingError, ParameterError
from ..numerics import functional as F
from ..numerics.layers import Linear, Module


def causal_mask(length: int) -> np.ndarray:
    """Lower-triangular boolean mask; ``mask[i, j]`` is true when ``j <= i``."""
    if length < 1:
        raise ParameterError(f"causal mask length must be >= 1, got {length}")
    return np.tril(np.ones((length, length), dtype=bool))


def key_padding_mask(valid) -> np.ndarray:
    """[B, Lk] key validity -> [B, 1, Lk] attention mask."""
    return np.asarray(valid, dtype=bool)[:, None, :]


class MultiHeadAttention(Module):
    def __init__(self, width, heads, rng):
        if width % heads:
            raise ParameterError(f"width {width} is not divisible by {heads} heads")
        self.width = width
        self.heads = heads
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.output = Linear(width, width, rng)
        self.last_weights = None

    def _split(self, x):
        b, length, _ = x.shape
        return x.reshape(b, length, self.heads, self.width // self.heads).transpose(0, 2, 1, 3)

    def forward(self, queries, keys, values, mask=None):
        """Attend ``queries`` [B, Lq, C] over ``keys``/``values`` [B, Lk, C].

        ``mask`` broadcasts to [B, Lq, Lk]; true marks an attendable key.
        """
        if queries.shape[-1] != self.width or keys.shape[-1] != self.width or values.shape[-1] != self.width:
            raise DimensionError(
                f"attention width {self.width} vs inputs {queries.shape}, {keys.shape}, {values.shape}"
            )
        b, lq, _ = queries.shape
        lk = keys.shape[1]
        q = self._split(self.query(queries))
        k = self._split(self.key(keys))
        v = self._split(self.value(values))
        scores = F.scale(q @ k.transpose(0, 1, 3, 2), 1.0 / math.sqrt(self.width // self.heads))
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            try:
                full = np.broadcast_to(mask, (b, lq, lk))
            except ValueError:
                raise DimensionError(f"mask shape {mask.shape} does not broadcast to {(b, lq, lk)}") from None
            if not full.any(axis=-1).all():
                raise MaskingError("a query row has no attendable keys")
            scores = F.masked_fill(scores, ~full[:, None], -np.inf)
        weights = F.softmax(scores, axis=-1)
        self.last_weights = weights.data
        context = (weights @ v).transpose(0, 2, 1, 3).reshape(b, lq, self.width)
        return self.output(context)


def multi_head_attention(q, k, v, params: MultiHeadAttention, mask=None):
    return params(q, k, v, mask)
