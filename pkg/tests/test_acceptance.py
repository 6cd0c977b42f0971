"""Acceptance suite: one group of tests per criterion, each tagged with ``criterion``.

The terminal summary prints a PASS/FAIL line per criterion (see conftest.py)
followed by the measured values recorded through the ``note`` fixture.
"""

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingerspell.checkpoint import load_checkpoint, save_checkpoint
from fingerspell.data import (
    DEFAULT_CHARS,
    SplitSpec,
    detokenize,
    generate_synthetic,
    save_corpus,
    split,
    tokenize,
)
from fingerspell.decoding import translate
from fingerspell.embeddings import LandmarkEmbedding, landmark_embed
from fingerspell.metrics import (
    bleu,
    cer,
    evaluate_pairs,
    levenshtein,
    read_pairs,
    sentence_bleu,
    wer,
)
from fingerspell.models import build_network
from fingerspell.numerics import functional as F
from fingerspell.numerics.rng import make_rng
from fingerspell.training import TrainConfig, dataset_loss, evaluate, train

from .bleu_cases import BLEU_CASES
from .gradcases import OPERATION_CASES, check_gradients
from .helpers import model_gradient_error, random_batch, share_weights, tiny_network
from .oracles import all_strings, levenshtein_table, naive_conv1d

C1 = pytest.mark.criterion(1, "gradient suite")
C2 = pytest.mark.criterion(2, "decoder causality")
C3 = pytest.mark.criterion(3, "overfit experiment")
C4 = pytest.mark.criterion(4, "transformer vs seq2seq ordering")
C5 = pytest.mark.criterion(5, "metric oracles")
C6 = pytest.mark.criterion(6, "residual identity")
C7 = pytest.mark.criterion(7, "round trips")
C8 = pytest.mark.criterion(8, "shape and length laws")


# -- 1. gradients ------------------------------------------------------------------

@C1
def test_gradient_suite_under_a_minute(note):
    started = time.perf_counter()
    op_errors = {name: check_gradients(fn, arrays) for name, (fn, arrays) in OPERATION_CASES.items()}
    model_errors = {kind: model_gradient_error(kind) for kind in ("transformer", "transformer-rlstm", "seq2seq")}
    elapsed = time.perf_counter() - started
    worst = max(op_errors.values())
    note(f"[1] {len(op_errors)} ops, worst relative error {worst:.1e}; "
         + ", ".join(f"{k} {v:.1e}" for k, v in model_errors.items()) + f"; {elapsed:.1f}s")
    assert worst < 1e-4
    assert all(err < 1e-4 for err in model_errors.values()), model_errors
    assert elapsed < 60


# -- 2. causality ------------------------------------------------------------------

@C2
@pytest.mark.parametrize("kind", ["transformer", "transformer-rlstm"])
def test_hundred_causality_trials(kind):
    rng = np.random.default_rng(2024)
    for trial in range(100):
        net = tiny_network(kind, seed=trial)
        target_len = int(rng.integers(2, 9))
        frames, mask, ids = random_batch(net, batch=2, seed=trial, target_len=target_len)
        t = int(rng.integers(0, target_len - 1))
        changed = ids.copy()
        changed[:, t + 1 :] = rng.integers(3, 62, size=changed[:, t + 1 :].shape)
        base = net(frames, mask, ids).data
        out = net(frames, mask, changed).data
        assert np.array_equal(out[:, : t + 1], base[:, : t + 1]), f"trial {trial}, t={t}"


# -- 3. overfitting ------------------------------------------------------------------

class _Reached(Exception):
    pass


def _overfit(kind, config, epochs, goal):
    corpus = generate_synthetic(32, seed=0)
    net = build_network(kind, {**config, "input_dim": corpus[0].landmarks.dim}, seed=0)
    state = {}

    def check(record):
        if record.epoch % 10 == 0:
            state.update(epoch=record.epoch, bleu=evaluate(net, corpus).bleu, ce=dataset_loss(net, corpus))
            if goal(state):
                raise _Reached

    started = time.perf_counter()
    try:
        train(net, corpus, [], TrainConfig(epochs=epochs, batch_size=8, lr=1e-3, seed=0), callback=check)
    except _Reached:
        pass
    return state, time.perf_counter() - started


@C3
@pytest.mark.slow
def test_transformer_overfits_thirty_two_phrases(note):
    config = dict(num_hid=64, heads=4, ff=40, enc_layers=2, dec_layers=1)
    state, elapsed = _overfit("transformer", config, 300, lambda s: s["bleu"] == 1.0 and s["ce"] < 0.05)
    note(f"[3] transformer: train BLEU-1 {state['bleu']:.4f}, CE {state['ce']:.4f} at epoch {state['epoch']} ({elapsed:.0f}s)")
    assert state["bleu"] == 1.0 and state["ce"] < 0.05
    assert elapsed < 300


@C3
@pytest.mark.slow
def test_seq2seq_overfits_thirty_two_phrases(note):
    config = dict(enc_hidden=128, dec_hidden=128)
    state, elapsed = _overfit("seq2seq", config, 500, lambda s: s["bleu"] >= 0.9)
    note(f"[3] seq2seq: train BLEU-1 {state['bleu']:.4f} at epoch {state['epoch']} ({elapsed:.0f}s)")
    assert state["bleu"] >= 0.9


# -- 4. relative ordering --------------------------------------------------------------

@C4
@pytest.mark.slow
def test_transformer_validation_bleu_not_below_seq2seq(note):
    corpus = generate_synthetic(512, seed=3)
    train_set, val_set, _ = split(corpus, SplitSpec(0.8, 0, seed=3))
    budget = TrainConfig(epochs=50, batch_size=16, lr=1e-3, seed=0, eval_every=0)
    scores = {}
    for kind, config in (
        ("transformer", dict(num_hid=64, heads=4, ff=40, enc_layers=2)),
        ("seq2seq", dict(enc_hidden=128, dec_hidden=128)),
    ):
        net = build_network(kind, {**config, "input_dim": corpus[0].landmarks.dim}, seed=0)
        started = time.perf_counter()
        _, records = train(net, train_set, val_set, budget)
        report = evaluate(net, val_set)
        scores[kind] = report.bleu
        note(f"[4] {kind}: val BLEU-1 {report.bleu:.4f}, WER {report.wer:.1f}, "
             f"val loss {records[-1].val_loss:.3f} after 50 epochs ({time.perf_counter() - started:.0f}s)")
    assert scores["transformer"] >= scores["seq2seq"]


# -- 5. metric oracles ---------------------------------------------------------------

@C5
@pytest.mark.slow
def test_levenshtein_matches_exhaustive_recursion(note):
    strings = all_strings("abc", 7)
    table = levenshtein_table(strings)
    started = time.perf_counter()
    for i, a in enumerate(strings):
        row = np.fromiter((levenshtein(a, b) for b in strings), dtype=np.int16, count=len(strings))
        mismatch = np.flatnonzero(row != table[i])
        assert mismatch.size == 0, (a, strings[mismatch[0]], row[mismatch[0]], table[i, mismatch[0]])
    note(f"[5] levenshtein agrees with the recursion on {len(strings) ** 2:,} pairs ({time.perf_counter() - started:.0f}s)")


@C5
@pytest.mark.parametrize("refs,cands,config,expected", BLEU_CASES)
def test_bleu_hand_derived_cases(refs, cands, config, expected):
    got = bleu(refs, cands, config) if config else bleu(refs, cands)
    assert abs(got - expected) <= 1e-9


@C5
def test_error_rate_cases():
    assert wer("the cat sat", "the cat sat") == 0.0 and cer("the cat sat", "the cat sat") == 0.0
    assert wer("a", "a b c") == 200.0
    assert cer("ab", "abxyz") == 150.0
    assert wer("the cat sat", "the dog sat") == pytest.approx(100 / 3)


@C5
def test_bleu_identity_on_generated_phrases():
    phrases = [s.phrase for s in generate_synthetic(503, seed=11, dim=2)]
    assert len(set(phrases)) == 503
    assert all(sentence_bleu(p, p) == 1.0 for p in phrases)
    assert bleu(phrases, phrases) == 1.0


# -- 6. residual identity --------------------------------------------------------------

@C6
@pytest.mark.parametrize("config", [{}, dict(num_hid=64, heads=4, ff=40, enc_layers=2, input_dim=6, frame_max=64)])
def test_zeroed_residual_block_is_bit_identical(config):
    plain = tiny_network("transformer", seed=0, **config)
    residual = tiny_network("transformer-rlstm", seed=1, **config)
    share_weights(plain, residual)
    residual.residual.zero_()
    for seed in range(5):
        frames, mask, ids = random_batch(plain, batch=3, seed=seed, target_len=6)
        assert np.array_equal(plain(frames, mask, ids).data, residual(frames, mask, ids).data)


# -- 7. round trips ----------------------------------------------------------------

@C7
@pytest.mark.parametrize("kind", ["transformer", "transformer-rlstm", "seq2seq"])
def test_checkpoint_save_load_is_byte_stable(kind, tmp_path):
    net = tiny_network(kind, seed=7)
    first = save_checkpoint(net.named_parameters(), {"model": kind}, tmp_path / "a.sltc")
    params, _ = load_checkpoint(first)
    other = tiny_network(kind, seed=8)
    other.load_state_dict(params)
    second = save_checkpoint(other.named_parameters(), {"model": kind}, tmp_path / "b.sltc")
    assert first.read_bytes() == second.read_bytes()


@C7
def test_tokenize_round_trip_on_ten_thousand_strings():
    rng = np.random.default_rng(10_000)
    chars = np.array(list(DEFAULT_CHARS))
    for _ in range(10_000):
        text = "".join(rng.choice(chars, size=int(rng.integers(0, 63))))
        assert detokenize(tokenize(text).ids) == text


@C7
def test_translate_then_eval_is_lossless(tmp_path):
    net = tiny_network("transformer", seed=3, target_max=48, frame_max=128, max_positions=16)
    corpus = generate_synthetic(12, seed=1, dim=3)
    save_corpus(tmp_path / "c.jsonl", corpus)
    assert translate(net, tmp_path / "c.jsonl", tmp_path / "t.tsv", expected_dim=3) == 12
    from_file = evaluate_pairs(read_pairs(tmp_path / "t.tsv"))
    direct = evaluate(net, corpus)
    assert from_file.rows == direct.rows
    assert from_file.summary_line() == direct.summary_line()


# -- 8. shape laws -------------------------------------------------------------------

@C8
def test_embedded_length_is_ceil_eighth_for_every_length():
    emb = LandmarkEmbedding(3, 8, make_rng(0))
    for T in range(1, 129):
        h, mask = landmark_embed(np.ones((1, T, 3)), np.ones((1, T), dtype=bool), emb)
        assert h.shape == (1, math.ceil(T / 8), 8) and mask.shape == (1, math.ceil(T / 8))


@C8
@settings(max_examples=200, deadline=None)
@given(
    T=st.integers(1, 40), K=st.integers(1, 7), S=st.integers(1, 4), P=st.integers(0, 3),
    cin=st.integers(1, 3), cout=st.integers(1, 3), seed=st.integers(0, 2**16),
)
def test_conv1d_length_law_against_naive_oracle(T, K, S, P, cin, cout, seed):
    if T + 2 * P < K:
        return
    rng = np.random.default_rng(seed)
    x, w, b = rng.normal(size=(T, cin)), rng.normal(size=(cout, cin, K)), rng.normal(size=cout)
    out = F.conv1d(x, w, b, stride=S, padding=P).data
    expected = naive_conv1d(x, w, b, S, P)
    assert out.shape[0] == (T + 2 * P - K) // S + 1 == expected.shape[0]
    np.testing.assert_allclose(out, expected, rtol=1e-4, atol=1e-4)
