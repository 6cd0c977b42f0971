"""Fused single-layer LSTM with backpropagation through time.

Gate layout along the 4H axis is (input, forget, candidate, output).
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DimensionError
from .functional import _sigmoid
from .tensor import Tensor, as_tensor, make_result


def lstm_layer(x, w_ih, w_hh, bias, h0, c0, mask=None):
    """Run one LSTM layer over ``x`` [B, T, D].

    Returns ``(outputs [B, T, H], h_T [B, H], c_T [B, H])``. Where ``mask``
    [B, T] is false the step is skipped: state is carried over unchanged and
    the emitted output repeats the previous hidden state.
    """
    x, w_ih, w_hh, bias = (as_tensor(t) for t in (x, w_ih, w_hh, bias))
    h0, c0 = as_tensor(h0), as_tensor(c0)
    if x.ndim != 3:
        raise DimensionError(f"lstm expects [B, T, D] input, got {x.shape}")
    batch, steps, d_in = x.shape
    hidden = w_hh.shape[0]
    if w_ih.shape != (d_in, 4 * hidden) or w_hh.shape != (hidden, 4 * hidden) or bias.shape != (4 * hidden,):
        raise DimensionError(
            f"lstm parameter shapes {w_ih.shape}, {w_hh.shape}, {bias.shape} "
            f"inconsistent with input width {d_in} and hidden size {hidden}"
        )
    if h0.shape != (batch, hidden) or c0.shape != (batch, hidden):
        raise DimensionError(f"lstm initial state shapes {h0.shape}/{c0.shape}, expected {(batch, hidden)}")
    if steps == 0:
        return Tensor(np.zeros((batch, 0, hidden), dtype=x.dtype)), h0, c0

    m = None if mask is None else np.asarray(mask, dtype=x.dtype).reshape(batch, steps, 1)
    packed = _lstm_packed(x, w_ih, w_hh, bias, h0, c0, m, hidden)
    outputs = packed[:, :, :hidden]
    return outputs, packed[:, -1, :hidden], packed[:, -1, hidden:]


def _lstm_packed(x, w_ih, w_hh, bias, h0, c0, m, hidden):
    batch, steps, _ = x.shape
    H = hidden
    xw = x.data @ w_ih.data + bias.data
    dtype = x.dtype
    hs = np.empty((batch, steps + 1, H), dtype=dtype)
    cs = np.empty((batch, steps + 1, H), dtype=dtype)
    gates = np.empty((batch, steps, 4 * H), dtype=dtype)
    tanh_c = np.empty((batch, steps, H), dtype=dtype)
    hs[:, 0] = h0.data
    cs[:, 0] = c0.data
    for t in range(steps):
        z = xw[:, t] + hs[:, t] @ w_hh.data
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c_new = f * cs[:, t] + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
        tanh_c[:, t] = tc
        if m is None:
            hs[:, t + 1] = h_new
            cs[:, t + 1] = c_new
        else:
            mt = m[:, t]
            hs[:, t + 1] = mt * h_new + (1 - mt) * hs[:, t]
            cs[:, t + 1] = mt * c_new + (1 - mt) * cs[:, t]

    out = np.concatenate([hs[:, 1:], cs[:, 1:]], axis=2)

    def backward(grad):
        gh_out = grad[:, :, :H]
        gc_out = grad[:, :, H:]
        dz_all = np.empty((batch, steps, 4 * H), dtype=dtype)
        dh = np.zeros((batch, H), dtype=dtype)
        dc = np.zeros((batch, H), dtype=dtype)
        gw_hh = np.zeros_like(w_hh.data)
        for t in reversed(range(steps)):
            dh = dh + gh_out[:, t]
            dc = dc + gc_out[:, t]
            i = gates[:, t, :H]
            f = gates[:, t, H : 2 * H]
            g = gates[:, t, 2 * H : 3 * H]
            o = gates[:, t, 3 * H :]
            tc = tanh_c[:, t]
            if m is None:
                dh_new, dc_new = dh, dc
                dh_keep = dc_keep = 0
            else:
                mt = m[:, t]
                dh_new, dc_new = mt * dh, mt * dc
                dh_keep, dc_keep = (1 - mt) * dh, (1 - mt) * dc
            dc_new = dc_new + dh_new * o * (1 - tc * tc)
            dz = np.concatenate(
                [
                    dc_new * g * i * (1 - i),
                    dc_new * cs[:, t] * f * (1 - f),
                    dc_new * i * (1 - g * g),
                    dh_new * tc * o * (1 - o),
                ],
                axis=1,
            )
            dz_all[:, t] = dz
            gw_hh += hs[:, t].T @ dz
            dh = dz @ w_hh.data.T + dh_keep
            dc = dc_new * f + dc_keep
        flat_dz = dz_all.reshape(-1, 4 * H)
        gx = (dz_all @ w_ih.data.T) if x.requires_grad else None
        gw_ih = x.data.reshape(-1, x.shape[2]).T @ flat_dz
        gb = flat_dz.sum(axis=0)
        return gx, gw_ih, gw_hh, gb, dh, dc

    return make_result(out, (x, w_ih, w_hh, bias, h0, c0), backward)
