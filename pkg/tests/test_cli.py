import csv
import json
import subprocess
import sys
import time

import pytest

from fingerspell.cli import main
from fingerspell.data import generate_synthetic, save_corpus
from fingerspell.metrics import write_pairs
from fingerspell.training import TrainRecord, write_records

TINY_TRAIN = [
    "--dim", "3", "--n", "20", "--epochs", "1", "--batch-size", "8", "--num-hid", "8", "--heads", "2",
    "--ff", "8", "--enc-layers", "1", "--frame-max", "64", "--target-max", "48", "--quiet",
]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run("train", *TINY_TRAIN, "--out-dir", out) == 0
    return out


# -- gen -------------------------------------------------------------------------

def test_gen_writes_requested_lines_deterministically(tmp_path):
    assert run("gen", "--n", 128, "--dim", 4, "--seed", 42, "--out", tmp_path / "a.jsonl", "--out-dir", tmp_path, "--quiet") == 0
    assert run("gen", "--n", 128, "--dim", 4, "--seed", 42, "--out", tmp_path / "b.jsonl", "--out-dir", tmp_path, "--quiet") == 0
    a = (tmp_path / "a.jsonl").read_bytes()
    assert len(a.splitlines()) == 128
    assert a == (tmp_path / "b.jsonl").read_bytes()
    manifest = json.loads((tmp_path / "manifest-gen.json").read_text())
    assert manifest["status"] == "ok" and manifest["seed"] == 42 and manifest["samples"] == 128


def test_non_positive_dim_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run("gen", "--dim", 0, "--out-dir", tmp_path)
    assert info.value.code == 2
    assert "must be positive" in capsys.readouterr().err


def test_bad_length_range_is_a_usage_error(tmp_path):
    assert run("gen", "--min-len", 30, "--max-len", 20, "--out-dir", tmp_path, "--quiet") == 2


def test_config_replays_a_manifest(tmp_path):
    first = tmp_path / "first"
    assert run("gen", "--n", 7, "--dim", 2, "--seed", 3, "--out-dir", first, "--quiet") == 0
    second = tmp_path / "second"
    assert run("gen", "--config", first / "manifest-gen.json", "--out", second / "corpus.jsonl", "--out-dir", second) == 0
    assert (first / "corpus.jsonl").read_bytes() == (second / "corpus.jsonl").read_bytes()


def test_explicit_flags_override_config(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"n": 5, "dim": 2}))
    assert run("gen", "--config", tmp_path / "cfg.json", "--n", 3, "--out-dir", tmp_path, "--quiet") == 0
    assert len((tmp_path / "corpus.jsonl").read_text().splitlines()) == 3


# -- train -----------------------------------------------------------------------

def test_train_smoke_run_is_fast(tmp_path):
    started = time.perf_counter()
    assert run("train", *TINY_TRAIN, "--out-dir", tmp_path) == 0
    assert time.perf_counter() - started < 30
    for name in ("model.sltc", "model.sltc.meta.json", "records.csv", "test.jsonl", "manifest-train.json"):
        assert (tmp_path / name).exists(), name
    assert len((tmp_path / "records.csv").read_text().splitlines()) == 2


def test_train_residual_variant_dispatch(tmp_path):
    assert run("train", *TINY_TRAIN, "--model", "transformer-rlstm", "--out-dir", tmp_path) == 0
    meta = json.loads((tmp_path / "model.sltc.meta.json").read_text())
    assert meta["model"] == "transformer-rlstm"


def test_train_same_seed_same_checkpoint(tmp_path, trained):
    assert run("train", *TINY_TRAIN, "--out-dir", tmp_path) == 0
    assert (tmp_path / "model.sltc").read_bytes() == (trained / "model.sltc").read_bytes()


# -- eval / translate ------------------------------------------------------------

def test_eval_echo_pairs(tmp_path, capsys):
    write_pairs(tmp_path / "echo.tsv", [("a", "hello there", "hello there"), ("b", "good night", "good night")])
    assert run("eval", "--pairs", tmp_path / "echo.tsv", "--out-dir", tmp_path) == 0
    assert "1.0,0.0,0.0,0.0" in capsys.readouterr().err
    assert (tmp_path / "summary.csv").read_text().splitlines()[1] == "1.0,0.0,0.0,0.0"


def test_eval_checkpoint_on_corpus(tmp_path, trained):
    assert run("eval", "--checkpoint", trained / "model.sltc", "--corpus", trained / "test.jsonl",
               "--out-dir", tmp_path, "--quiet") == 0
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "buckets.csv").exists()


def test_translate_feeds_eval(tmp_path, trained):
    corpus = generate_synthetic(3, seed=5, dim=3, phrase_len_range=(16, 20))
    save_corpus(tmp_path / "three.jsonl", corpus)
    assert run("translate", "--checkpoint", trained / "model.sltc", "--corpus", tmp_path / "three.jsonl",
               "--out-dir", tmp_path, "--quiet") == 0
    lines = (tmp_path / "translations.tsv").read_text().splitlines()
    assert len(lines) == 4
    assert run("eval", "--pairs", tmp_path / "translations.tsv", "--out-dir", tmp_path, "--quiet") == 0


def test_corrupt_checkpoint_exits_one_with_offset(tmp_path, trained, capsys):
    blob = (trained / "model.sltc").read_bytes()
    (tmp_path / "bad.sltc").write_bytes(blob[:100])
    (tmp_path / "bad.sltc.meta.json").write_bytes((trained / "model.sltc.meta.json").read_bytes())
    assert run("eval", "--checkpoint", tmp_path / "bad.sltc", "--corpus", trained / "test.jsonl", "--out-dir", tmp_path) == 1
    assert "byte offset" in capsys.readouterr().err


def test_missing_checkpoint_exits_one(tmp_path, trained, capsys):
    assert run("translate", "--checkpoint", tmp_path / "nope.sltc", "--corpus", trained / "test.jsonl",
               "--out-dir", tmp_path) == 1
    assert "nope.sltc" in capsys.readouterr().err


def test_eval_without_inputs_is_usage_error(tmp_path):
    assert run("eval", "--out-dir", tmp_path, "--quiet") == 2


# -- report ----------------------------------------------------------------------

def _records(path, epochs):
    write_records(path, [TrainRecord(e, 1.0 / e, 2.0 / e, float(e), 0.1) for e in range(1, epochs + 1)])
    return path


def test_report_merges_runs(tmp_path):
    specs = [f"{name}={_records(tmp_path / f'{name}.csv', 4)}" for name in ("seq2seq", "transformer", "rlstm")]
    (tmp_path / "summary.csv").write_text("bleu,wer,cer,mean_levenshtein\n0.5,40.0,20.0,3.0\n")
    assert run("report", "--records", *specs, "--metrics", f"rlstm={tmp_path / 'summary.csv'}",
               "--out-dir", tmp_path, "--quiet") == 0
    with open(tmp_path / "comparison.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["model"] for r in rows] == ["seq2seq", "transformer", "rlstm"]
    assert rows[2]["bleu"] == "0.5" and rows[0]["bleu"] == ""
    curves = (tmp_path / "loss_curves.csv").read_text().splitlines()
    assert curves[0] == "epoch,model,train_loss,val_loss" and len(curves) == 1 + 12


def test_report_warns_on_mismatched_epochs(tmp_path, capsys):
    a = _records(tmp_path / "a.csv", 3)
    b = _records(tmp_path / "b.csv", 5)
    assert run("report", "--records", a, b, "--out-dir", tmp_path) == 0
    assert "different epoch counts" in capsys.readouterr().err
    assert len((tmp_path / "loss_curves.csv").read_text().splitlines()) == 1 + 8


# -- entry point -----------------------------------------------------------------

def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fingerspell.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("fingerspell ")
