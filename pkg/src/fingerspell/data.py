"""Landmark/phrase corpora: vocabulary, tokenisation, file format, synthesis,
splitting and padded batch assembly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import LengthError, ParameterError, ParseError, VocabularyError
from .numerics.rng import spawn

PAD, START, END = 0, 1, 2

PUNCTUATION = "!#$%&'()*+,-./:;=?@[_~"
DEFAULT_CHARS = " " + PUNCTUATION + "0123456789" + "abcdefghijklmnopqrstuvwxyz"

FRAME_MAX = 128
TARGET_MAX = 64
DEFAULT_DIM = 126  # 2 hands x 21 landmarks x (x, y, z)


class Vocabulary:
    """Bijective character <-> id map with PAD=0, START=1, END=2 reserved."""

    controls = ("<pad>", "<start>", "<end>")

    def __init__(self, chars: str = DEFAULT_CHARS):
        if len(set(chars)) != len(chars):
            raise ParameterError("vocabulary characters must be unique")
        self.chars = chars
        self._ids = {c: i + len(self.controls) for i, c in enumerate(chars)}

    pad_id = PAD
    start_id = START
    end_id = END

    def __len__(self):
        return len(self.controls) + len(self.chars)

    @property
    def size(self):
        return len(self)

    def __contains__(self, char):
        return char in self._ids

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and other.chars == self.chars

    def __hash__(self):
        return hash(self.chars)

    def id_of(self, char: str) -> int:
        try:
            return self._ids[char]
        except KeyError:
            raise VocabularyError(f"character {char!r} (code point {ord(char)}) is not in the vocabulary") from None

    def char_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self):
            raise VocabularyError(f"token id {token_id} outside vocabulary of size {len(self)}")
        if token_id < len(self.controls):
            return self.controls[token_id]
        return self.chars[token_id - len(self.controls)]

    def check_phrase(self, phrase: str) -> None:
        for char in phrase:
            if char not in self._ids:
                raise VocabularyError(
                    f"character {char!r} (code point {ord(char)}) in phrase {phrase!r} is not in the vocabulary"
                )


VOCAB = Vocabulary()


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple
    raw: str

    def __len__(self):
        return len(self.ids)


def tokenize(phrase: str, vocab: Vocabulary = VOCAB) -> TokenSequence:
    ids = (START,) + tuple(vocab.id_of(c) for c in phrase) + (END,)
    return TokenSequence(ids=ids, raw=phrase)


def detokenize(ids: Sequence[int], vocab: Vocabulary = VOCAB) -> str:
    """Drop PAD/START, stop at the first END, map the rest to characters."""
    chars = []
    for token in ids:
        token = int(token)
        if token >= len(vocab) or token < 0:
            raise VocabularyError(f"token id {token} outside vocabulary of size {len(vocab)}")
        if token == END:
            break
        if token in (PAD, START):
            continue
        chars.append(vocab.char_of(token))
    return "".join(chars)


@dataclass
class LandmarkSequence:
    """One source sample: ``frames`` is [T, D]; ``frame_mask`` marks real frames."""

    id: str
    frames: np.ndarray
    frame_mask: np.ndarray = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ParameterError(f"sample {self.id!r}: frames must be [T>=1, D], got {self.frames.shape}")
        if self.frame_mask is None:
            self.frame_mask = np.ones(self.frames.shape[0], dtype=bool)
        else:
            self.frame_mask = np.asarray(self.frame_mask, dtype=bool)

    @property
    def length(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


class Sample(NamedTuple):
    landmarks: LandmarkSequence
    phrase: str


def subsample_frames(seq: LandmarkSequence, frame_max: int) -> LandmarkSequence:
    """Uniformly pick ``frame_max`` frames when the sequence is longer."""
    if seq.length <= frame_max:
        return seq
    idx = (np.arange(frame_max) * seq.length) // frame_max
    return LandmarkSequence(seq.id, seq.frames[idx], seq.frame_mask[idx])


# -- corpus file format --------------------------------------------------------

def _format_row(row) -> str:
    return "[" + ",".join("NaN" if v != v else f"{v:.9g}" for v in row.tolist()) + "]"


def save_corpus(path, samples: Sequence[Sample]) -> None:
    """Write one JSON record per line: ``{"id", "phrase", "frames"}``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seq, phrase in samples:
            frames = ",".join(_format_row(row) for row in seq.frames)
            fh.write(
                f'{{"id": {json.dumps(seq.id)}, "phrase": {json.dumps(phrase)}, "frames": [{frames}]}}\n'
            )


def load_corpus(
    path,
    expected_dim: int,
    frame_max: int = FRAME_MAX,
    vocab: Vocabulary = VOCAB,
    target_max: int | None = None,
) -> list[Sample]:
    """Read a corpus file, zero-filling NaN coordinates.

    Sequences longer than ``frame_max`` are uniformly subsampled. When
    ``target_max`` is given, phrases whose token sequence would not fit are
    rejected with :class:`LengthError`.
    """
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                sample_id = str(record["id"])
                phrase = record["phrase"]
                raw = record["frames"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed record ({exc})", line=lineno) from None
            if not isinstance(phrase, str):
                raise ParseError("phrase must be a string", line=lineno)
            try:
                frames = np.array(
                    [[np.nan if v is None else v for v in row] for row in raw], dtype=np.float32
                )
            except (TypeError, ValueError) as exc:
                raise ParseError(f"frames are not a numeric matrix ({exc})", line=lineno) from None
            if frames.ndim != 2 or frames.shape[0] < 1:
                raise ParseError(f"frames must be a non-empty [T, D] matrix, got shape {frames.shape}", line=lineno)
            if frames.shape[1] != expected_dim:
                raise ParseError(f"frame width {frames.shape[1]} != expected {expected_dim}", line=lineno)
            try:
                vocab.check_phrase(phrase)
            except VocabularyError as exc:
                raise VocabularyError(f"line {lineno}, sample {sample_id!r}: {exc}") from None
            if target_max is not None and len(phrase) + 2 > target_max:
                raise LengthError(
                    f"sample {sample_id!r}: {len(phrase) + 2} tokens exceed target max {target_max}"
                )
            frames = np.nan_to_num(frames, nan=0.0)
            seq = subsample_frames(LandmarkSequence(sample_id, frames), frame_max)
            samples.append(Sample(seq, phrase))
    return samples


# -- synthetic corpus ------------------------------------------------------------

WORDS = """
a i am an as at be by do go he if in is it me my no of on or so to up we
ace age air all and are art bad bag big box boy bus but can car cat cup day did
dog dry eat egg end eye far fed few fix fly for fun get got had has hat her him
his hot how ice ill its job joy key kid law let lie lit lot low man map may mix
new not now nut odd off oil old one our out own pay pen pie put ran red run sad
saw sea see set she shy sit six sky sun tea ten the too top toy try two use van
was way wet who why win yes yet you zoo
able also away baby back bake ball bank bear beat bees best bike bird blue boat
book both busy cake call calm came card care city club cold come cook cool dark
data deep door down draw drop drug dust each easy edge even ever face fact fair
fall farm fast fear fish five food foot form four free from full game gave gift
girl give glad goal gold good gray grow hair half hand hard have head hear help
here high hill hold home hope hour huge idea iron jump just keep kind king knew
know lake land last late lead left life like line lion list live long look lost
love made mail make many meal meet milk mind miss moon more most move much must
name near need next nice note once only open over page park part path pies plan
play poem pool quit rain read real rest rice ride ring road rock room rule safe
salt same seen ship shop show sing slow snow soft song soon star stay step stop
such sure take talk tall team tell than that them then they this time told took
town tree true turn very wait walk want warm wash wave week well went what when
wide wild will wind wise with word work yard year your
about above after agree again alarm apple baker beach being below black bread
brown carry catch chair cheap child clean clear clock close cloud coach coast
could cover crowd curve dance dream drink drive early earth eight empty enjoy
every extra faith field fight first floor fresh front fruit funny ghost giant
glass grass great green group guess happy heart heavy horse hotel house human
issue juice jumps large laugh learn least leave level light lucky lunch magic
major march match metal money month mouth movie music never night noise north
ocean offer order other paper party peace phone piano piece plant plate point
power quick quiet radio reach ready right river robot round scale score sense
seven shape share sharp sheep shirt short since skill sleep small smile smoke
solid sound south space speak spend sport stand start steep still stone storm
story sugar sweet table teach thank their there thing think three tiger today
touch tower track train truck trust under until usual value visit voice water
watch wheel where which while white whole woman world would write wrong young
always animal answer around autumn before behind better bridge bright broken
camera castle change cheese choice circle coffee colour cotton dinner doctor
effort enough family famous father finger flower forest friend garden gentle
golden ground health hidden island jungle letter listen little market middle
minute modern moment mother nature number orange people pepper pencil planet
please pocket prince public rabbit record school silver simple sister summer
supply tomato travel turtle valley window winter wonder yellow
another balance between capital careful company courage curious distant
evening example feeling freedom general harvest history holiday kitchen
library machine morning natural nothing outside perfect picture problem
promise quickly rainbow science special station stomach student success
teacher thought through weather welcome without
building business complete computer concrete daughter elephant everyone
exercise favorite football homework language learning mountain practice
question remember sandwich shoulder strength together umbrella unicycle
vacation
adventure beautiful breakfast celebrate challenge chocolate community
determine different education important knowledge necessary newspaper
president wonderful
""".split()

_WORDS_BY_LEN: dict[int, list[str]] = {}
for _w in WORDS:
    _WORDS_BY_LEN.setdefault(len(_w), []).append(_w)
_MAX_WORD = max(_WORDS_BY_LEN)


def _random_phrase(rng, length: int) -> str:
    """Space-separated words whose total character count is exactly ``length``."""
    words: list[str] = []
    used = 0
    while True:
        remaining = length - used - (1 if words else 0)
        if remaining <= 0:
            break
        if remaining <= _MAX_WORD and remaining in _WORDS_BY_LEN:
            bucket = _WORDS_BY_LEN[remaining]
            if remaining <= 3 or rng.random() < 0.5:
                words.append(bucket[rng.integers(len(bucket))])
                break
        # leave room for a separator plus at least one more character
        cap = min(_MAX_WORD, remaining - 2)
        choices = [w for n in range(1, cap + 1) for w in _WORDS_BY_LEN.get(n, ())]
        word = choices[rng.integers(len(choices))]
        words.append(word)
        used += len(word) + (1 if len(words) > 1 else 0)
    return " ".join(words)


def generate_phrases(n: int, rng, length_range=(16, 43)) -> list[str]:
    lo, hi = length_range
    seen: set[str] = set()
    phrases: list[str] = []
    attempts = 0
    while len(phrases) < n:
        phrase = _random_phrase(rng, int(rng.integers(lo, hi + 1)))
        attempts += 1
        if phrase in seen and attempts < 50 * n:
            continue
        seen.add(phrase)
        phrases.append(phrase)
    return phrases


def generate_synthetic(
    n: int,
    seed: int,
    dim: int = DEFAULT_DIM,
    phrase_len_range: tuple[int, int] = (16, 43),
    n_phrases: int | None = None,
    jitter: float = 0.05,
    vocab: Vocabulary = VOCAB,
) -> list[Sample]:
    """Build a learnable landmark corpus.

    Every character owns a fixed prototype frame drawn from the seed; a
    phrase is rendered as 2-4 jittered copies of each character's prototype.
    Phrases come from a pool of ``n_phrases`` distinct strings (default
    ``min(n, 503)``) and sample ``i`` uses pool entry ``i % n_phrases``.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    lo, hi = phrase_len_range
    if not 1 <= lo <= hi <= 43:
        raise ParameterError(f"phrase length range {phrase_len_range} must lie within [1, 43]")
    streams = spawn(seed, "prototypes", "phrases", "frames")
    prototypes = streams["prototypes"].uniform(0.0, 1.0, size=(len(vocab.chars), dim))
    pool = generate_phrases(n_phrases or min(n, 503), streams["phrases"], (lo, hi))
    frame_rng = streams["frames"]
    samples = []
    for i in range(n):
        phrase = pool[i % len(pool)]
        rows = []
        for char in phrase:
            copies = int(frame_rng.integers(2, 5))
            proto = prototypes[vocab.id_of(char) - len(vocab.controls)]
            rows.append(proto + frame_rng.normal(0.0, jitter, size=(copies, dim)))
        frames = np.concatenate(rows, axis=0).astype(np.float32)
        samples.append(Sample(LandmarkSequence(f"synth-{i:05d}", frames), phrase))
    return samples


# -- splitting and batching ----------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    test_count: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ParameterError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.test_count < 0:
            raise ParameterError(f"test_count must be >= 0, got {self.test_count}")


def split(corpus: Sequence, spec: SplitSpec):
    """Seeded shuffle, then train = first ``floor(n * fraction)``, val = rest,
    test = first ``test_count`` of val."""
    n = len(corpus)
    if n < 5:
        raise ParameterError(f"need at least 5 samples to split, got {n}")
    n_train = int(math.floor(n * spec.train_fraction))
    order = np.random.default_rng(spec.seed).permutation(n)
    train = [corpus[i] for i in order[:n_train]]
    val = [corpus[i] for i in order[n_train:]]
    if spec.test_count > len(val):
        raise ParameterError(f"test_count {spec.test_count} exceeds validation size {len(val)}")
    return train, val, val[: spec.test_count]


@dataclass
class Batch:
    ids: list
    frames: np.ndarray  # [B, frame_max, D]
    frame_mask: np.ndarray  # [B, frame_max]
    tokens: np.ndarray  # [B, target_max]
    lengths: np.ndarray  # token count per row incl. START/END
    phrases: list

    def __len__(self):
        return len(self.ids)


def batchify(
    samples: Sequence[Sample],
    batch_size: int,
    frame_max: int = FRAME_MAX,
    target_max: int = TARGET_MAX,
    pad_id: int = PAD,
    vocab: Vocabulary = VOCAB,
) -> list[Batch]:
    """Group samples in order into zero/PAD-padded batches."""
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    batches = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        dim = chunk[0][0].dim
        b = len(chunk)
        frames = np.zeros((b, frame_max, dim), dtype=np.float32)
        mask = np.zeros((b, frame_max), dtype=bool)
        tokens = np.full((b, target_max), pad_id, dtype=np.int64)
        lengths = np.zeros(b, dtype=np.int64)
        for row, (seq, phrase) in enumerate(chunk):
            seq = subsample_frames(seq, frame_max)
            frames[row, : seq.length] = seq.frames
            mask[row, : seq.length] = seq.frame_mask
            ids = tokenize(phrase, vocab).ids
            if len(ids) > target_max:
                raise LengthError(f"sample {seq.id!r}: {len(ids)} tokens exceed target max {target_max}")
            tokens[row, : len(ids)] = ids
            lengths[row] = len(ids)
        batches.append(
            Batch(
                ids=[s[0].id for s in chunk],
                frames=frames,
                frame_mask=mask,
                tokens=tokens,
                lengths=lengths,
                phrases=[s[1] for s in chunk],
            )
        )
    return batches
