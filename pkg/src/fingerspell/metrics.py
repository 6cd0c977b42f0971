"""Translation quality metrics: Levenshtein distance, BLEU, WER/CER and
length-bucketed BLEU reports."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .exceptions import ParameterError, ParseError, UndefinedMetricError

DEFAULT_BUCKET_EDGES = (16, 21, 26, 31, 36, 41, 44)
PAIR_HEADER = ("id", "reference", "hypothesis")


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between two sequences (strings or token lists)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class Alignment:
    substitutions: int
    deletions: int
    insertions: int
    hits: int

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    @property
    def reference_length(self):
        return self.substitutions + self.deletions + self.hits


def align(reference: Sequence, hypothesis: Sequence) -> Alignment:
    """Count S/D/I/hits along one minimal edit path.

    Ties on the backtrace prefer match, then substitution, deletion, insertion.
    """
    n, m = len(reference), len(hypothesis)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i][j] = min(
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
                dist[i - 1][j - 1] + (reference[i - 1] != hypothesis[j - 1]),
            )
    s = d = ins = hits = 0
    i, j = n, m
    while i or j:
        here = dist[i][j]
        if i and j and reference[i - 1] == hypothesis[j - 1] and dist[i - 1][j - 1] == here:
            hits += 1
            i, j = i - 1, j - 1
        elif i and j and dist[i - 1][j - 1] + 1 == here:
            s += 1
            i, j = i - 1, j - 1
        elif i and dist[i - 1][j] + 1 == here:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return Alignment(s, d, ins, hits)


def tokens(text, granularity: str = "word"):
    if not isinstance(text, str):
        return list(text)
    if granularity == "word":
        return text.split()
    if granularity == "char":
        return list(text)
    raise ParameterError(f"granularity must be 'word' or 'char', got {granularity!r}")


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 1
    weights: tuple = (1.0,)
    granularity: str = "word"

    def __post_init__(self):
        if len(self.weights) != self.max_n:
            raise ParameterError(f"{len(self.weights)} weights given for max_n={self.max_n}")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ParameterError(f"BLEU weights must sum to 1, got {sum(self.weights)}")
        if self.granularity not in ("word", "char"):
            raise ParameterError(f"granularity must be 'word' or 'char', got {self.granularity!r}")


BLEU1 = BleuConfig()


def _ngrams(seq, n):
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def bleu(references, candidates, config: BleuConfig = BLEU1) -> float:
    """Corpus BLEU with clipped n-gram precision and brevity penalty.

    A zero precision at any order, or an empty candidate side, scores 0.
    """
    if len(references) != len(candidates):
        raise ParameterError(f"{len(references)} references vs {len(candidates)} candidates")
    if not references:
        raise ParameterError("BLEU needs at least one sentence pair")
    refs = [tokens(r, config.granularity) for r in references]
    cands = [tokens(c, config.granularity) for c in candidates]
    cand_len = sum(len(c) for c in cands)
    ref_len = sum(len(r) for r in refs)
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n, weight in zip(range(1, config.max_n + 1), config.weights):
        matched = total = 0
        for ref, cand in zip(refs, cands):
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            matched += sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
            total += sum(cand_counts.values())
        if matched == 0 or total == 0:
            return 0.0
        log_sum += weight * math.log(matched / total)
    penalty = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return penalty * math.exp(log_sum)


def sentence_bleu(reference, candidate, config: BleuConfig = BLEU1) -> float:
    return bleu([reference], [candidate], config)


def wer(reference, hypothesis) -> float:
    """Word error rate in percent: (S + D + I) / (S + D + hits) * 100."""
    ref = tokens(reference, "word")
    if not ref:
        raise UndefinedMetricError("error rate is undefined for an empty reference")
    a = align(ref, tokens(hypothesis, "word"))
    return 100.0 * a.errors / a.reference_length


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate in percent; spaces count as characters."""
    ref = tokens(reference, "char")
    if not ref:
        raise UndefinedMetricError("error rate is undefined for an empty reference")
    a = align(ref, tokens(hypothesis, "char"))
    return 100.0 * a.errors / a.reference_length


def corpus_error_rate(references, hypotheses, granularity="word") -> float:
    errors = length = 0
    for ref, hyp in zip(references, hypotheses):
        a = align(tokens(ref, granularity), tokens(hyp, granularity))
        errors += a.errors
        length += a.reference_length
    if length == 0:
        raise UndefinedMetricError("error rate is undefined for empty references")
    return 100.0 * errors / length


# -- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class SampleRow:
    id: str
    reference: str
    hypothesis: str
    char_len: int
    bleu1: float


@dataclass(frozen=True)
class Bucket:
    lo: int
    hi: int
    mean_bleu1: float | None
    count: int


@dataclass
class MetricsReport:
    bleu: float
    wer: float
    cer: float
    mean_levenshtein: float
    rows: list = field(default_factory=list)
    buckets: list = field(default_factory=list)

    def summary_line(self) -> str:
        return f"{self.bleu!r},{self.wer!r},{self.cer!r},{self.mean_levenshtein!r}"

    def best(self, k=10):
        return self.rows[:k]

    def worst(self, k=10):
        return list(reversed(self.rows[-k:]))


def bucket_report(rows: Sequence[SampleRow], edges=DEFAULT_BUCKET_EDGES) -> list[Bucket]:
    """Mean sentence BLEU-1 per reference-length bucket ``[edges[i], edges[i+1])``."""
    edges = list(edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ParameterError(f"bucket edges must be strictly increasing, got {edges}")
    buckets = []
    for lo, hi in zip(edges, edges[1:]):
        scores = [r.bleu1 for r in rows if lo <= r.char_len < hi]
        mean = sum(scores) / len(scores) if scores else None
        buckets.append(Bucket(lo, hi, mean, len(scores)))
    return buckets


def evaluate_pairs(pairs, config: BleuConfig = BLEU1, edges=DEFAULT_BUCKET_EDGES) -> MetricsReport:
    """Score ``(id, reference, hypothesis)`` triples.

    Per-sample rows come back sorted by BLEU-1, best first (ties by id).
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("cannot evaluate an empty set of pairs")
    refs = [p[1] for p in pairs]
    hyps = [p[2] for p in pairs]
    rows = [
        SampleRow(pid, ref, hyp, len(ref), sentence_bleu(ref, hyp, config))
        for pid, ref, hyp in pairs
    ]
    rows.sort(key=lambda r: (-r.bleu1, r.id))
    return MetricsReport(
        bleu=bleu(refs, hyps, config),
        wer=corpus_error_rate(refs, hyps, "word"),
        cer=corpus_error_rate(refs, hyps, "char"),
        mean_levenshtein=sum(levenshtein(r, h) for r, h in zip(refs, hyps)) / len(pairs),
        rows=rows,
        buckets=bucket_report(rows, edges),
    )


# -- file formats ----------------------------------------------------------------

def write_pairs(path, triples) -> None:
    """Write ``id TAB reference TAB hypothesis`` lines after a header line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(PAIR_HEADER) + "\n")
        for pid, ref, hyp in triples:
            for value in (pid, ref or "", hyp):
                if "\t" in value or "\n" in value:
                    raise ParameterError(f"sample {pid!r}: tabs/newlines cannot be stored in the pair file")
            fh.write(f"{pid}\t{ref or ''}\t{hyp}\n")


def read_pairs(path) -> list[tuple[str, str, str]]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if lineno == 1 and tuple(line.split("\t")) == PAIR_HEADER:
                continue
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
            triples.append(tuple(parts))
    return triples


def _fmt(value):
    return "" if value is None else repr(float(value))


def write_report(report: MetricsReport, out_dir, top_k=10) -> dict:
    """Write summary, per-sample, bucket and best/worst CSVs; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("summary", "samples", "buckets", "best", "worst")}
    with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
        fh.write("bleu,wer,cer,mean_levenshtein\n")
        fh.write(report.summary_line() + "\n")
    with open(paths["samples"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "char_len", "bleu1"])
        for row in report.rows:
            writer.writerow([row.id, row.char_len, _fmt(row.bleu1)])
    with open(paths["buckets"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bucket_lo", "bucket_hi", "mean_bleu1", "count"])
        for b in report.buckets:
            writer.writerow([b.lo, b.hi, _fmt(b.mean_bleu1), b.count])
    for name, rows in (("best", report.best(top_k)), ("worst", report.worst(top_k))):
        with open(paths[name], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["no", "actual", "prediction", "char", "bleu"])
            for i, row in enumerate(rows, start=1):
                writer.writerow([i, row.reference, row.hypothesis, row.char_len, _fmt(row.bleu1)])
    return paths
