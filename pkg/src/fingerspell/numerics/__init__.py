"""Dense tensors, reverse-mode autodiff, layers and the Adam optimiser."""

from .functional import (
    add,
    concat,
    conv1d,
    conv1d_output_length,
    cross_entropy,
    div,
    dropout,
    embedding,
    exp,
    getitem,
    layer_norm,
    linear,
    log,
    log_softmax,
    masked_fill,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    sub,
    sum,
    tanh,
    transpose,
)
from .layers import LSTM, Conv1d, Embedding, LayerNorm, Linear, Module
from .optim import Adam, AdamState, adam_step, clip_gradients
from .recurrent import lstm_layer
from .rng import make_rng, spawn
from .tensor import Tensor, as_tensor, get_dtype, no_grad, parameter, precision, set_dtype

__all__ = [
    "Adam",
    "adam_step",
    "AdamState",
    "add",
    "as_tensor",
    "clip_gradients",
    "concat",
    "conv1d",
    "Conv1d",
    "conv1d_output_length",
    "cross_entropy",
    "div",
    "dropout",
    "embedding",
    "Embedding",
    "exp",
    "get_dtype",
    "getitem",
    "layer_norm",
    "LayerNorm",
    "linear",
    "Linear",
    "log",
    "log_softmax",
    "LSTM",
    "lstm_layer",
    "make_rng",
    "masked_fill",
    "matmul",
    "mean",
    "Module",
    "mul",
    "neg",
    "no_grad",
    "parameter",
    "precision",
    "relu",
    "reshape",
    "scale",
    "set_dtype",
    "sigmoid",
    "softmax",
    "spawn",
    "sub",
    "sum",
    "tanh",
    "Tensor",
    "transpose",
]
