"""Command line entry point: ``fingerspell {gen,train,eval,translate,report}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from ._version import __version__
from .data import DEFAULT_DIM, SplitSpec, generate_synthetic, load_corpus, save_corpus, split
from .decoding import translate
from .estimators import load_translator, make_translator
from .exceptions import FingerspellError
from .metrics import DEFAULT_BUCKET_EDGES, evaluate_pairs, read_pairs, write_report
from .training import evaluate, read_records, write_records

log = logging.getLogger("fingerspell")

TRANSFORMER_FLAGS = ("num_hid", "heads", "ff", "enc_layers", "dec_layers")
SEQ2SEQ_FLAGS = ("enc_hidden", "dec_hidden", "layers", "embed_dim", "source_width")
SHARED_MODEL_FLAGS = ("frame_max", "target_max", "classes")
TRAIN_FLAGS = ("epochs", "batch_size", "lr", "eval_every", "clip_norm")


class UsageError(Exception):
    pass


def _positive(kind=int):
    def convert(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return convert


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out-dir", default=".", help="directory for outputs and the run manifest")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    common.add_argument("--config", help="JSON file of flag defaults (flat keys) or a previous run manifest")

    parser = argparse.ArgumentParser(prog="fingerspell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="write a synthetic landmark corpus")
    gen.add_argument("--n", type=_positive(), default=512, help="number of samples")
    gen.add_argument("--dim", type=_positive(), default=DEFAULT_DIM, help="landmark feature width")
    gen.add_argument("--min-len", type=_positive(), default=16)
    gen.add_argument("--max-len", type=_positive(), default=43)
    gen.add_argument("--n-phrases", type=_positive(), default=None, help="distinct phrases (default min(n, 503))")
    gen.add_argument("--out", help="corpus path (default OUT_DIR/corpus.jsonl)")

    tr = sub.add_parser("train", parents=[common], help="train a model and record loss curves")
    tr.add_argument("--corpus", help="corpus file; omit to train on a fresh synthetic corpus")
    tr.add_argument("--n", type=_positive(), default=512, help="synthetic corpus size when --corpus is absent")
    tr.add_argument("--dim", type=_positive(), default=DEFAULT_DIM)
    tr.add_argument("--model", choices=("seq2seq", "transformer", "transformer-rlstm"), default="transformer")
    tr.add_argument("--epochs", type=_positive(), default=50)
    tr.add_argument("--batch-size", type=_positive(), default=64)
    tr.add_argument("--lr", type=_positive(float), default=1e-3)
    tr.add_argument("--eval-every", type=int, default=1, help="decode the validation split every N epochs (0: never)")
    tr.add_argument("--clip-norm", type=_positive(float), default=None)
    tr.add_argument("--train-fraction", type=float, default=0.8)
    tr.add_argument("--test-count", type=int, default=2000, help="test samples taken from validation (capped at its size)")
    tr.add_argument("--num-hid", type=_positive(), default=100)
    tr.add_argument("--heads", type=_positive(), default=4)
    tr.add_argument("--ff", type=_positive(), default=40)
    tr.add_argument("--enc-layers", type=_positive(), default=5)
    tr.add_argument("--dec-layers", type=_positive(), default=1)
    tr.add_argument("--dropout", type=float, default=None, help="default 0.1 (transformer) / 0.5 (seq2seq)")
    tr.add_argument("--enc-hidden", type=_positive(), default=1024)
    tr.add_argument("--dec-hidden", type=_positive(), default=1024)
    tr.add_argument("--layers", type=_positive(), default=2)
    tr.add_argument("--embed-dim", type=_positive(), default=62)
    tr.add_argument("--source-width", type=_positive(), default=64)
    tr.add_argument("--frame-max", type=_positive(), default=128)
    tr.add_argument("--target-max", type=_positive(), default=64)
    tr.add_argument("--classes", type=int, choices=(62, 64), default=62)

    ev = sub.add_parser("eval", parents=[common], help="score a model (or a translation file)")
    ev.add_argument("--checkpoint", help="model checkpoint written by train")
    ev.add_argument("--corpus", help="corpus to decode and score")
    ev.add_argument("--pairs", help="score an existing translation TSV instead of decoding")
    ev.add_argument("--dim", type=_positive(), default=None, help="frame width (default: from checkpoint)")
    ev.add_argument("--buckets", default=",".join(map(str, DEFAULT_BUCKET_EDGES)), help="comma-separated length bucket edges")
    ev.add_argument("--top", type=_positive(), default=10, help="rows in the best/worst tables")

    tl = sub.add_parser("translate", parents=[common], help="decode a corpus to a TSV file")
    tl.add_argument("--checkpoint", required=True)
    tl.add_argument("--corpus", required=True)
    tl.add_argument("--dim", type=_positive(), default=None)
    tl.add_argument("--out", help="output TSV (default OUT_DIR/translations.tsv)")

    rp = sub.add_parser("report", parents=[common], help="merge loss curves and final metrics across runs")
    rp.add_argument("--records", nargs="+", required=True, metavar="[NAME=]CSV", help="records CSVs written by train")
    rp.add_argument("--metrics", nargs="*", default=[], metavar="NAME=CSV", help="summary.csv files written by eval")
    return parser


def _load_config(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and isinstance(data.get("config"), dict) and "command" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in data.items()}


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = _load_config(args.config)
        except (OSError, ValueError, UsageError) as exc:
            parser.error(f"cannot read --config: {exc}")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        overrides = {k: v for k, v in overrides.items() if k in known and k not in ("config", "command")}
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return parser, args


class Manifest:
    """Run record written before work starts and finalised afterwards."""

    def __init__(self, args, inputs, outputs):
        self.path = Path(args.out_dir) / f"manifest-{args.command}.json"
        config = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
        self.data = {
            "command": args.command,
            "config": config,
            "seed": args.seed,
            "inputs": inputs,
            "outputs": outputs,
            "version": __version__,
            "started": datetime.now(timezone.utc).isoformat(),
            "finished": None,
            "status": "running",
        }
        self._write()

    def _write(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def finish(self, status="ok", **extra):
        self.data.update(extra)
        self.data["status"] = status
        self.data["finished"] = datetime.now(timezone.utc).isoformat()
        self._write()


def _out(args, given, default_name):
    return Path(given) if given else Path(args.out_dir) / default_name


# -- subcommands -----------------------------------------------------------------------

def cmd_gen(args):
    if args.min_len > args.max_len or args.max_len > 43:
        raise UsageError(f"length range must satisfy 1 <= min-len <= max-len <= 43, got {args.min_len}-{args.max_len}")
    out = _out(args, args.out, "corpus.jsonl")
    manifest = Manifest(args, {}, {"corpus": str(out)})
    corpus = generate_synthetic(args.n, args.seed, args.dim, (args.min_len, args.max_len), args.n_phrases)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(out, corpus)
    log.info("wrote %d samples to %s", len(corpus), out)
    manifest.finish(samples=len(corpus))


def _model_params(args):
    names = SHARED_MODEL_FLAGS + TRAIN_FLAGS
    names += SEQ2SEQ_FLAGS if args.model == "seq2seq" else TRANSFORMER_FLAGS
    params = {name: getattr(args, name) for name in names}
    if args.dropout is not None:
        params["dropout"] = args.dropout
    params["seed"] = args.seed
    return params


def cmd_train(args):
    out_dir = Path(args.out_dir)
    outputs = {
        "checkpoint": str(out_dir / "model.sltc"),
        "records": str(out_dir / "records.csv"),
        "test_corpus": str(out_dir / "test.jsonl"),
    }
    manifest = Manifest(args, {"corpus": args.corpus}, outputs)
    if args.corpus:
        corpus = load_corpus(args.corpus, args.dim, frame_max=args.frame_max, target_max=args.target_max)
    else:
        corpus = generate_synthetic(args.n, args.seed, args.dim)
    n_val = len(corpus) - math.floor(len(corpus) * args.train_fraction)
    spec = SplitSpec(args.train_fraction, min(args.test_count, n_val), args.seed)
    train_set, val_set, test_set = split(corpus, spec)
    model = make_translator(args.model, **_model_params(args))
    records = []

    def progress(record):
        records.append(record)
        write_records(outputs["records"], records)
        log.info("epoch %3d  train %.4f  val %.4f  lev %s  %.1fs", record.epoch, record.train_loss,
                 record.val_loss, "-" if math.isnan(record.val_levenshtein) else f"{record.val_levenshtein:.2f}",
                 record.seconds)

    model.fit([s.landmarks for s in train_set], [s.phrase for s in train_set],
              [s.landmarks for s in val_set] or None, [s.phrase for s in val_set] or None,
              callback=progress)
    model.save(outputs["checkpoint"])
    save_corpus(outputs["test_corpus"], test_set)
    log.info("saved %s (%d train / %d val / %d test)", outputs["checkpoint"], len(train_set), len(val_set), len(test_set))
    manifest.finish(train=len(train_set), val=len(val_set), test=len(test_set))


def _print_table(title, rows):
    log.info("%s", title)
    for i, row in enumerate(rows, start=1):
        log.info("%3d  %-44s  %-44s  %3d  %.4f", i, row.reference, row.hypothesis, row.char_len, row.bleu1)


def cmd_eval(args):
    try:
        edges = [int(x) for x in args.buckets.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--buckets must be comma-separated integers, got {args.buckets!r}") from None
    if args.pairs:
        manifest = Manifest(args, {"pairs": args.pairs}, {"dir": args.out_dir})
        report = evaluate_pairs(read_pairs(args.pairs), edges=edges)
    else:
        if not (args.checkpoint and args.corpus):
            raise UsageError("eval needs --pairs, or both --checkpoint and --corpus")
        manifest = Manifest(args, {"checkpoint": args.checkpoint, "corpus": args.corpus}, {"dir": args.out_dir})
        model = load_translator(args.checkpoint)
        samples = load_corpus(args.corpus, args.dim or model.n_features_in_, frame_max=model.frame_max)
        report = evaluate(model.network_, samples, edges=edges)
    paths = write_report(report, args.out_dir, args.top)
    log.info("bleu,wer,cer,mean_levenshtein")
    log.info("%s", report.summary_line())
    _print_table("highest BLEU", report.best(args.top))
    _print_table("lowest BLEU", report.worst(args.top))
    manifest.finish(files={k: str(v) for k, v in paths.items()})


def cmd_translate(args):
    out = _out(args, args.out, "translations.tsv")
    manifest = Manifest(args, {"checkpoint": args.checkpoint, "corpus": args.corpus}, {"translations": str(out)})
    model = load_translator(args.checkpoint)
    count = translate(model.network_, args.corpus, out, expected_dim=args.dim or model.n_features_in_)
    log.info("translated %d samples into %s", count, out)
    manifest.finish(samples=count)


def _named(spec):
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, Path(path)
    path = Path(spec)
    name = path.parent.name if path.stem == "records" and path.parent.name else path.stem
    return name, path


def _fmt(value):
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else repr(float(value))


def cmd_report(args):
    out_dir = Path(args.out_dir)
    outputs = {"curves": str(out_dir / "loss_curves.csv"), "comparison": str(out_dir / "comparison.csv")}
    manifest = Manifest(args, {"records": args.records, "metrics": args.metrics}, outputs)
    runs = [(name, read_records(path)) for name, path in map(_named, args.records)]
    metrics = {}
    for spec in args.metrics:
        name, path = _named(spec)
        with open(path, encoding="utf-8", newline="") as fh:
            metrics[name] = next(csv.DictReader(fh))
    lengths = {len(records) for _, records in runs}
    if len(lengths) > 1:
        log.warning("runs have different epoch counts %s; emitting the union", sorted(lengths))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(outputs["curves"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "model", "train_loss", "val_loss"])
        for name, records in runs:
            for r in records:
                writer.writerow([r.epoch, name, _fmt(r.train_loss), _fmt(r.val_loss)])
    with open(outputs["comparison"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "epochs", "final_train_loss", "final_val_loss", "final_val_levenshtein", "bleu", "wer"])
        for name, records in runs:
            last = records[-1] if records else None
            m = metrics.get(name, {})
            writer.writerow([
                name,
                len(records),
                _fmt(last.train_loss if last else None),
                _fmt(last.val_loss if last else None),
                _fmt(last.val_levenshtein if last else None),
                m.get("bleu", ""),
                m.get("wer", ""),
            ])
    for name, records in runs:
        if records:
            log.info("%-20s epochs=%d final train_loss=%.4f", name, len(records), records[-1].train_loss)
    manifest.finish()


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "translate": cmd_translate, "report": cmd_report}


def main(argv=None) -> int:
    parser, args = parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    started = time.perf_counter()
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fingerspell {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FingerspellError, OSError, KeyError) as exc:
        print(f"fingerspell {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    log.debug("%s finished in %.1fs", args.command, time.perf_counter() - started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
