"""Parameter containers built on the functional ops."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import ConfigurationError, DimensionError
from . import functional as F
from .recurrent import lstm_layer
from .tensor import Tensor, get_dtype, parameter


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(get_dtype())


def zeros(shape):
    return np.zeros(shape, dtype=get_dtype())


class Module:
    """Minimal parameter tree.

    Parameters are discovered by walking instance attributes in definition
    order, so names (``"encoder.0.attention.query.weight"``) are stable.
    """

    def named_parameters(self, prefix=""):
        params = {}
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                params[name] = value
            elif isinstance(value, Module):
                params.update(value.named_parameters(name + "."))
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Module):
                for i, child in enumerate(value):
                    params.update(child.named_parameters(f"{name}.{i}."))
        return params

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters().items()}

    def load_state_dict(self, state):
        own = self.named_parameters()
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise ConfigurationError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise DimensionError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def zero_(self):
        """Set every parameter of this subtree to zero."""
        for p in self.parameters():
            p.data[...] = 0
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_features, out_features, rng, bias=True):
        self.weight = parameter(glorot_uniform(rng, (in_features, out_features), in_features, out_features))
        self.bias = parameter(zeros(out_features)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1, padding=0):
        fan_in, fan_out = in_channels * kernel_size, out_channels * kernel_size
        self.weight = parameter(
            glorot_uniform(rng, (out_channels, in_channels, kernel_size), fan_in, fan_out)
        )
        self.bias = parameter(zeros(out_channels))
        self.stride = stride
        self.padding = padding

    @property
    def kernel_size(self):
        return self.weight.shape[2]

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Embedding(Module):
    def __init__(self, num_embeddings, dim, rng):
        table = rng.normal(0.0, math.sqrt(1.0 / dim), size=(num_embeddings, dim))
        self.weight = parameter(table.astype(get_dtype()))

    def forward(self, ids):
        return F.embedding(self.weight, ids)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        self.gamma = parameter(np.ones(dim, dtype=get_dtype()))
        self.beta = parameter(zeros(dim))
        self.eps = eps

    def forward(self, x):
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class LSTMCellParams(Module):
    def __init__(self, input_size, hidden_size, rng):
        self.w_ih = parameter(glorot_uniform(rng, (input_size, 4 * hidden_size), input_size, 4 * hidden_size))
        self.w_hh = parameter(glorot_uniform(rng, (hidden_size, 4 * hidden_size), hidden_size, 4 * hidden_size))
        self.bias = parameter(zeros(4 * hidden_size))


class LSTM(Module):
    """Stacked LSTM; dropout between layers only while training."""

    def __init__(self, input_size, hidden_size, rng, num_layers=1, dropout=0.0):
        self.hidden_size = hidden_size
        self.dropout = dropout
        self.layers = [
            LSTMCellParams(input_size if i == 0 else hidden_size, hidden_size, rng)
            for i in range(num_layers)
        ]

    @property
    def num_layers(self):
        return len(self.layers)

    def forward(self, x, state=None, mask=None, training=False, rng=None):
        """Return ``(outputs, [(h, c) per layer])``; ``state`` defaults to zeros."""
        x = F.as_tensor(x)
        batch = x.shape[0]
        if state is None:
            blank = Tensor(np.zeros((batch, self.hidden_size), dtype=x.dtype))
            state = [(blank, blank)] * self.num_layers
        finals = []
        out = x
        for i, (layer, (h0, c0)) in enumerate(zip(self.layers, state)):
            if i > 0:
                out = F.dropout(out, self.dropout, training, rng)
            out, h, c = lstm_layer(out, layer.w_ih, layer.w_hh, layer.bias, h0, c0, mask)
            finals.append((h, c))
        return out, finals
