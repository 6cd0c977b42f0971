"""Differentiable operations on :class:`Tensor`.

Elementwise operations follow numpy broadcasting; their gradients are summed
back to the operand shapes. Heavier operations (conv1d, lstm, layer_norm,
cross_entropy) are fused: one tape node with a hand-written backward pass.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DegenerateBatchError, DimensionError, ParameterError, VocabularyError
from .tensor import Tensor, as_tensor, get_dtype, make_result


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _lift(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a, dtype=_peer_dtype(b))
    b = b if isinstance(b, Tensor) else Tensor(b, dtype=a.dtype)
    return a, b


def _peer_dtype(other):
    return other.dtype if isinstance(other, Tensor) else get_dtype()


# -- elementwise arithmetic ------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _lift(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _lift(a, b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _lift(a, b)

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return make_result(a.data / b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = np.maximum(a.data, 0)
    return make_result(out, (a,), lambda g: (g * (a.data > 0),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1 - out * out),))


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return make_result(out, (a,), lambda g: (g * out * (1 - out),))


# -- reductions and shape manipulation ---------------------------------------

def sum(a, axis=None, keepdims=False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out), (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return div(sum(a, axis=axis, keepdims=keepdims), float(count))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return make_result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def _is_basic_index(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in items)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return make_result(np.array(a.data[index]), (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def masked_fill(a, mask, value) -> Tensor:
    """Replace entries where ``mask`` is true by ``value`` (no gradient there)."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask, np.asarray(value, dtype=a.dtype), a.data)

    def backward(g):
        return (_unbroadcast(np.where(mask, 0, g), a.shape),)

    return make_result(out, (a,), backward)


# -- linear algebra ------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product with numpy batching semantics."""
    a, b = _lift(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            if b.ndim == 2:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_result(out, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with weight stored as [in, out]."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


# -- normalisation and probabilities ---------------------------------------------

def softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), backward)


def log_softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), backward)


def layer_norm(x, gamma, beta, eps=1e-5) -> Tensor:
    """Normalise over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    size = x.shape[-1] if x.ndim else 0
    if size == 0:
        raise DimensionError("layer_norm over an empty last axis")
    if gamma.shape != (size,) or beta.shape != (size,):
        raise DimensionError(
            f"layer_norm: last axis {size} does not match gamma {gamma.shape} / beta {beta.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = inv_std * (
                gxhat
                - gxhat.mean(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            )
        lead = g.reshape(-1, size)
        ggamma = (lead * xhat.reshape(-1, size)).sum(axis=0)
        gbeta = lead.sum(axis=0)
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), backward)


def cross_entropy(logits, targets, pad_id=0) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over non-pad positions."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(
            f"cross_entropy: logits {logits.shape} do not match targets {targets.shape}"
        )
    n_classes = logits.shape[-1]
    valid = targets != pad_id
    count = int(valid.sum())
    if count == 0:
        raise DegenerateBatchError("cross_entropy: every target position is padding")
    bad = valid & ((targets < 0) | (targets >= n_classes))
    if bad.any():
        raise VocabularyError(f"cross_entropy: target id {int(targets[bad][0])} outside [0, {n_classes})")

    flat = logits.data.reshape(-1, n_classes)
    flat_targets = np.where(valid, targets, 0).reshape(-1)
    flat_valid = valid.reshape(-1)
    shifted = flat - flat.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(flat.shape[0]), flat_targets]
    nll = (log_z - picked) * flat_valid
    loss = np.asarray(nll.sum() / count, dtype=logits.dtype)

    def backward(g):
        probs = np.exp(shifted - log_z[:, None])
        probs[np.arange(flat.shape[0]), flat_targets] -= 1
        probs *= flat_valid[:, None] * (g / count)
        return (probs.reshape(logits.shape),)

    return make_result(loss, (logits,), backward)


# -- lookup, convolution, dropout -------------------------------------------------

def embedding(table, ids) -> Tensor:
    """Gather rows of ``table``; the gradient scatter-adds back into those rows."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    vocab = table.shape[0]
    if ids.size:
        bad = (ids < 0) | (ids >= vocab)
        if bad.any():
            raise VocabularyError(f"token id {int(ids[bad][0])} outside table of size {vocab}")
    out = table.data[ids] if ids.size else np.zeros(ids.shape + table.shape[1:], dtype=table.dtype)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, *table.shape[1:]))
        return (full,)

    return make_result(out, (table,), backward)


def conv1d_output_length(length, kernel, stride, padding):
    return (length + 2 * padding - kernel) // stride + 1


def conv1d(x, weight, bias=None, stride=1, padding=0) -> Tensor:
    """Cross-correlation over time.

    ``x`` is [T, C_in] or [B, T, C_in]; ``weight`` is [C_out, C_in, K].
    Returns [T_out, C_out] (or batched) with zero padding on both ends.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if stride < 1:
        raise ParameterError(f"conv1d stride must be >= 1, got {stride}")
    unbatched = x.ndim == 2
    xd = x.data[None] if unbatched else x.data
    if xd.ndim != 3:
        raise DimensionError(f"conv1d expects [T, C] or [B, T, C] input, got {x.shape}")
    c_out, c_in, k = weight.shape
    if xd.shape[2] != c_in:
        raise DimensionError(f"conv1d: input channels {xd.shape[2]} != weight channels {c_in}")
    batch, length = xd.shape[:2]
    padded_len = length + 2 * padding
    if padded_len < k or padded_len == 0:
        raise DimensionError(
            f"conv1d: kernel {k} longer than padded input {padded_len} (T={length}, padding={padding})"
        )
    t_out = conv1d_output_length(length, k, stride, padding)
    xp = np.pad(xd, ((0, 0), (padding, padding), (0, 0)))
    # windows: [B, T_out, C_in, K]
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)[:, ::stride][:, :t_out]
    w2 = weight.data.reshape(c_out, c_in * k)
    out = windows.reshape(batch, t_out, c_in * k) @ w2.T
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents.append(bias)
    if unbatched:
        out = out[0]

    def backward(g):
        g3 = g[None] if unbatched else g
        gx = gw = gb = None
        if x.requires_grad:
            gwin = (g3 @ w2).reshape(batch, t_out, c_in, k)
            gxp = np.zeros_like(xp)
            end = stride * (t_out - 1) + 1
            for j in range(k):
                gxp[:, j : j + end : stride] += gwin[:, :, :, j]
            gx = gxp[:, padding : padding + length]
            if unbatched:
                gx = gx[0]
        if weight.requires_grad:
            gw = (
                g3.reshape(-1, c_out).T @ windows.reshape(batch * t_out, c_in * k)
            ).reshape(weight.shape)
        if bias is not None:
            gb = g3.reshape(-1, c_out).sum(axis=0)
        return (gx, gw, gb) if bias is not None else (gx, gw)

    return make_result(out, parents, backward)


def dropout(x, p, training, rng) -> Tensor:
    """Inverted dropout: zero with probability ``p``, scale survivors by 1/(1-p)."""
    x = as_tensor(x)
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) * np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    return make_result(x.data * keep, (x,), lambda g: (g * keep,))


def scale(x, factor: float) -> Tensor:
    """Multiply by a python scalar without promoting the dtype."""
    return mul(x, Tensor(factor, dtype=as_tensor(x).dtype))
