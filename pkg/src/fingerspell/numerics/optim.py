"""Adam optimiser with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionError, NumericError, ParameterError
from .tensor import Tensor


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lr: float) -> None:
    """Apply one Adam update in place.

    ``params`` and ``grads`` map parameter names to arrays / tensors. A
    missing gradient is treated as zero.
    """
    if lr <= 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    # bias correction folded into the step size; eps is added to the raw sqrt(v)
    step_size = lr * np.sqrt(correction2) / correction1
    for name, p in params.items():
        value = p.data if isinstance(p, Tensor) else p
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        elif g.shape != value.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter {name!r} shape {value.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * (g * g)
        value -= (step_size * m / (np.sqrt(v) + state.eps)).astype(value.dtype, copy=False)


class Adam:
    """Stateful wrapper around :func:`adam_step` for a fixed parameter set."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self, clip_norm=None):
        grads = {name: p.grad for name, p in self.params.items()}
        if clip_norm is not None:
            clip_gradients(grads, clip_norm)
        adam_step(self.params, grads, self.state, self.lr)


def clip_gradients(grads, max_norm):
    total = np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values() if g is not None))
    if total > max_norm:
        factor = max_norm / (total + 1e-12)
        for name, g in grads.items():
            if g is not None:
                grads[name] = g * np.asarray(factor, dtype=g.dtype)
    return total
