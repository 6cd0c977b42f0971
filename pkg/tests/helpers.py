"""Shared builders for model-level tests."""

import numpy as np

from fingerspell.data import END, PAD, START
from fingerspell.models import build_network
from fingerspell.numerics.functional import cross_entropy
from fingerspell.numerics.tensor import precision

from .oracles import central_difference, max_relative_error

TINY_TRANSFORMER = dict(num_hid=8, heads=2, ff=8, enc_layers=1, dec_layers=1, input_dim=3, frame_max=16, target_max=8)
TINY_SEQ2SEQ = dict(enc_hidden=8, dec_hidden=8, layers=2, embed_dim=8, source_width=8, input_dim=3, frame_max=16, target_max=8)


def tiny_network(kind, seed=0, **overrides):
    base = TINY_SEQ2SEQ if kind == "seq2seq" else TINY_TRANSFORMER
    return build_network(kind, {**base, **overrides}, seed=seed)


def random_batch(network, batch=2, seed=0, lengths=None, target_len=5):
    """Frames, frame mask and decoder ids shaped for ``network``."""
    cfg = network.config
    rng = np.random.default_rng(seed)
    lengths = lengths or [int(rng.integers(1, cfg.frame_max + 1)) for _ in range(batch)]
    frames = np.zeros((batch, cfg.frame_max, cfg.input_dim))
    mask = np.zeros((batch, cfg.frame_max), dtype=bool)
    for row, length in enumerate(lengths):
        frames[row, :length] = rng.uniform(-1, 1, (length, cfg.input_dim))
        mask[row, :length] = True
    ids = rng.integers(3, 62, size=(batch, target_len))
    ids[:, 0] = START
    return frames, mask, ids


def model_gradient_error(kind, seed=0):
    """Max relative error between autodiff and central differences over every parameter (f64)."""
    with precision(np.float64):
        network = tiny_network(kind, seed=seed)
        for p in network.parameters():
            p.data = np.random.default_rng(seed).uniform(-0.5, 0.5, p.shape)
        frames, mask, ids = random_batch(network, batch=2, seed=seed, lengths=[16, 9])
        targets = np.roll(ids, -1, axis=1)
        targets[:, -1] = END
        targets[1, -2:] = PAD
        def loss():
            return cross_entropy(network(frames, mask, ids), targets, PAD)

        network.zero_grad()
        loss().backward()
        params = network.parameters()
        analytic = [p.grad for p in params]
        numeric = central_difference(lambda: loss().data, [p.data for p in params])
    return max_relative_error(analytic, numeric)


def share_weights(source, target):
    """Copy every parameter ``target`` has in common with ``source`` (by name)."""
    theirs = source.named_parameters()
    for name, p in target.named_parameters().items():
        if name in theirs:
            p.data = theirs[name].data.copy()

