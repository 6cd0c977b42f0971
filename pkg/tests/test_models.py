import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingerspell.checkpoint import decode, encode
from fingerspell.data import PAD, generate_synthetic
from fingerspell.exceptions import ConfigurationError, MaskingError, ParameterError
from fingerspell.models import (
    MultiHeadAttention,
    Seq2SeqConfig,
    TransformerConfig,
    build_network,
    causal_mask,
    count_parameters,
    key_padding_mask,
    multi_head_attention,
    network_kind,
)
from fingerspell.numerics.functional import cross_entropy
from fingerspell.numerics.layers import Embedding
from fingerspell.numerics.rng import make_rng
from fingerspell.numerics.tensor import Tensor, precision
from fingerspell.training import TrainConfig, train

from .helpers import model_gradient_error, random_batch, share_weights, tiny_network

# 2 queries x 2 keys, identity projections, one head of width 2:
# weights per row are sigmoid(+-1/sqrt(2)), computed by hand.
HAND_WEIGHT = 0.6697615493266569
HAND_OUTPUT = [[1.6604769013466862, 2.6604769013466862], [2.3395230986533138, 3.3395230986533138]]


def identity_attention(width, heads=1):
    mha = MultiHeadAttention(width, heads, make_rng(0))
    for layer in (mha.query, mha.key, mha.value, mha.output):
        layer.weight.data = np.eye(width, dtype=layer.weight.dtype)
        layer.bias.data[...] = 0
    return mha


# -- masks ----------------------------------------------------------------------

def test_causal_mask_examples():
    assert causal_mask(1).tolist() == [[True]]
    assert causal_mask(3).tolist() == [[True, False, False], [True, True, False], [True, True, True]]


def test_causal_mask_row_counts():
    for length in range(1, 65):
        np.testing.assert_array_equal(causal_mask(length).sum(axis=1), np.arange(1, length + 1))


def test_causal_mask_empty():
    with pytest.raises(ParameterError):
        causal_mask(0)


def test_key_padding_mask_shape():
    assert key_padding_mask(np.ones((3, 5), dtype=bool)).shape == (3, 1, 5)


# -- attention ------------------------------------------------------------------

def test_attention_single_key_returns_value():
    with precision(np.float64):
        mha = identity_attention(4)
        q = Tensor(np.random.default_rng(0).normal(size=(1, 3, 4)))
        kv = Tensor(np.random.default_rng(1).normal(size=(1, 1, 4)))
        out = multi_head_attention(q, kv, kv, mha)
    np.testing.assert_allclose(out.data[0], np.repeat(kv.data[0], 3, axis=0), rtol=1e-12)


def test_attention_uniform_scores_average_attendable_values():
    with precision(np.float64):
        mha = identity_attention(2)
        q = Tensor(np.zeros((1, 1, 2)))
        k = Tensor(np.ones((1, 4, 2)))
        v = Tensor(np.array([[[1.0, 0.0], [3.0, 2.0], [5.0, 4.0], [100.0, 100.0]]]))
        mask = np.array([[[True, True, True, False]]])
        out = mha(q, k, v, mask)
    np.testing.assert_allclose(out.data[0, 0], [3.0, 2.0], rtol=1e-12)
    assert mha.last_weights[0, 0, 0, 3] == 0.0


def test_attention_two_by_two_hand_case():
    with precision(np.float64):
        mha = identity_attention(2)
        q = k = Tensor(np.eye(2)[None])
        v = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        out = mha(q, k, v)
    np.testing.assert_allclose(mha.last_weights[0, 0], [[HAND_WEIGHT, 1 - HAND_WEIGHT], [1 - HAND_WEIGHT, HAND_WEIGHT]], rtol=1e-12)
    np.testing.assert_allclose(out.data[0], HAND_OUTPUT, rtol=1e-12)


def test_attention_row_without_keys():
    mha = identity_attention(2)
    x = Tensor(np.ones((1, 2, 2)))
    with pytest.raises(MaskingError):
        mha(x, x, x, np.array([[[True, False], [False, False]]]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), lk=st.integers(1, 6))
def test_attention_weights_rows_sum_to_one(seed, lk):
    rng = np.random.default_rng(seed)
    mha = MultiHeadAttention(4, 2, make_rng(seed))
    mask = rng.random((1, 3, lk)) < 0.6
    mask[..., 0] = True
    x = Tensor(rng.normal(size=(1, 3, 4)))
    kv = Tensor(rng.normal(size=(1, lk, 4)))
    mha(x, kv, kv, mask)
    weights = mha.last_weights
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all(weights[np.broadcast_to(~mask[:, None], weights.shape)] == 0)


def test_attention_width_not_divisible():
    with pytest.raises(ParameterError):
        MultiHeadAttention(6, 4, make_rng(0))


# -- transformer ----------------------------------------------------------------

@pytest.mark.parametrize("kind", ["transformer", "transformer-rlstm", "seq2seq"])
def test_output_shape(kind):
    net = tiny_network(kind)
    frames, mask, ids = random_batch(net, batch=3, target_len=6)
    assert net(frames, mask, ids).shape == (3, 6, 62)


@pytest.mark.parametrize("kind", ["transformer", "transformer-rlstm"])
def test_causality_sample(kind):
    net = tiny_network(kind, seed=3)
    frames, mask, ids = random_batch(net, batch=2, seed=4, target_len=8)
    base = net(frames, mask, ids).data
    rng = np.random.default_rng(5)
    for t in range(7):
        changed = ids.copy()
        changed[:, t + 1 :] = rng.integers(3, 62, size=changed[:, t + 1 :].shape)
        out = net(frames, mask, changed).data
        assert np.array_equal(out[:, : t + 1], base[:, : t + 1])


@pytest.mark.parametrize("kind", ["transformer", "transformer-rlstm", "seq2seq"])
def test_padding_values_do_not_change_logits(kind):
    net = tiny_network(kind, seed=1)
    frames, mask, ids = random_batch(net, batch=2, seed=2, lengths=[16, 5])
    noisy = np.where(mask[..., None], frames, np.random.default_rng(9).normal(size=frames.shape) * 50)
    assert np.array_equal(net(frames, mask, ids).data, net(noisy, mask, ids).data)


def test_residual_variant_with_zero_block_matches_plain():
    plain = tiny_network("transformer", seed=0)
    residual = tiny_network("transformer-rlstm", seed=11)
    share_weights(plain, residual)
    residual.residual.zero_()
    frames, mask, ids = random_batch(plain, batch=2, seed=3)
    assert np.array_equal(plain(frames, mask, ids).data, residual(frames, mask, ids).data)


@pytest.mark.parametrize("kind", ["transformer", "seq2seq"])
def test_eval_mode_is_deterministic(kind):
    net = tiny_network(kind, seed=2)
    frames, mask, ids = random_batch(net)
    assert np.array_equal(net(frames, mask, ids).data, net(frames, mask, ids).data)


@pytest.mark.parametrize("kind", ["transformer", "seq2seq"])
def test_training_mode_applies_dropout(kind):
    net = tiny_network(kind, seed=2)
    frames, mask, ids = random_batch(net)
    evaluated = net(frames, mask, ids).data
    trained = net(frames, mask, ids, training=True, rng=make_rng(0)).data
    assert not np.array_equal(evaluated, trained)


def test_residual_variant_gradients():
    assert model_gradient_error("transformer-rlstm") < 1e-4


def test_seq2seq_loss_decreases_over_first_epochs():
    corpus = generate_synthetic(8, seed=0, dim=3, phrase_len_range=(16, 20))
    net = tiny_network("seq2seq", dropout=0.0, frame_max=96, target_max=24, max_positions=12)
    _, records = train(net, corpus, [], TrainConfig(epochs=5, batch_size=4, lr=1e-2, seed=0))
    losses = [r.train_loss for r in records]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


# -- configuration and parameter counts ---------------------------------------------

def test_default_configs_mirror_reported_architecture():
    cfg = TransformerConfig()
    assert (cfg.num_hid, cfg.heads, cfg.ff, cfg.frame_max, cfg.target_max, cfg.classes) == (100, 4, 40, 128, 64, 62)
    s2s = Seq2SeqConfig()
    assert (s2s.enc_hidden, s2s.dec_hidden, s2s.layers, s2s.dropout, s2s.embed_dim) == (1024, 1024, 2, 0.5, 62)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        build_network("transformer", {"num_hid": 10, "heads": 4})
    with pytest.raises(ConfigurationError):
        build_network("seq2seq", {"enc_hidden": 8, "dec_hidden": 16})
    with pytest.raises(ConfigurationError):
        build_network("lstm")


def test_network_kind_round_trip():
    for kind in ("seq2seq", "transformer", "transformer-rlstm"):
        assert network_kind(tiny_network(kind)) == kind


def test_count_parameters_examples():
    assert count_parameters({}) == 0
    assert count_parameters(Embedding(62, 62, make_rng(0))) == 3844


def test_count_parameters_matches_checkpoint_walk():
    net = build_network("transformer", {"num_hid": 64, "enc_layers": 2})
    tensors = decode(encode(net.named_parameters()))
    assert len(tensors) == len(net.named_parameters())
    assert count_parameters(net) == sum(int(np.prod(t.shape)) for t in tensors.values())


def test_seq2seq_decoder_starts_from_encoder_state():
    net = tiny_network("seq2seq", seed=4)
    frames, mask, ids = random_batch(net, batch=1, seed=1)
    other = frames.copy()
    other[0, :4] += 1.0
    assert not np.array_equal(net(frames, mask, ids).data, net(other, mask, ids).data)


def test_cross_entropy_target_padding_ignored_by_network_loss():
    net = tiny_network("transformer")
    frames, mask, ids = random_batch(net, batch=2)
    targets = ids.copy()
    targets[1, 2:] = PAD
    assert np.isfinite(float(cross_entropy(net(frames, mask, ids), targets, PAD).data))
