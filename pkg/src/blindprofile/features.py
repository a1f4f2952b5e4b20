"""Client-side feature extraction: 43 text features and landmark ingestion.

The text vector is 14 MRC attribute means, then 10 NRC emotion/sentiment
word counts, then 19 dictionary-free standard counts (43 in total).
Landmark vectors arrive precomputed as 136 reals (68 points, x then y).

Tokenization and the abbreviation/emoticon detectors are declared
conventions of this package, not reproductions of any particular tool:
words are maximal ASCII letter/apostrophe runs (case-folded, boundary
apostrophes stripped); sentences end at a run of . ! ? followed by
whitespace or end of text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import BadDimension, LexiconMissing, ParseError

MRC_ATTRIBUTES = (
    "nlet", "nphon", "nsyl", "kf_freq", "kf_ncats", "kf_nsamp", "tl_freq",
    "brown_freq", "fam", "conc", "imag", "meanc", "meanp", "aoa",
)

NRC_CATEGORIES = (
    "anger", "fear", "anticipation", "trust", "surprise",
    "sadness", "joy", "disgust", "negative", "positive",
)

LIWC_FEATURES = (
    "word_count", "words_per_sentence", "unique_words", "six_letter_words",
    "abbreviations", "emoticons", "question_marks", "periods", "commas",
    "colons", "semicolons", "exclamation_marks", "dashes", "quotation_marks",
    "apostrophes", "parentheses", "other_punctuation", "all_punctuation",
    "interrogative_sentences",
)

TEXT_FEATURE_NAMES = (
    tuple(f"mrc_{a}" for a in MRC_ATTRIBUTES)
    + tuple(f"nrc_{c}" for c in NRC_CATEGORIES)
    + tuple(f"liwc_{f}" for f in LIWC_FEATURES)
)

LANDMARK_FEATURE_NAMES = tuple(
    f"point{p:02d}_{axis}" for p in range(68) for axis in ("x", "y")
)

TEXT_DIM = 43
LANDMARK_DIM = 136

TEXT_SCHEMA = "text-v1"
LANDMARK_SCHEMA = "landmarks-v1"

_WORD_RE = re.compile(r"[a-z']+")
_SENTENCE_RE = re.compile(r"[.!?]+(?=\s|$)")
_ABBREV_RE = re.compile(r"\b(?:[a-zA-Z]\.){2,}")

_DASHES = "-–—"
_QUOTES = '"“”'
_APOSTROPHES = "'’"
_NAMED_PUNCT = set("?.,:;!()" + _DASHES + _QUOTES + _APOSTROPHES)
_OTHER_PUNCT = set("#$%&*+/<=>@[\\]^_`{|}~")


@dataclass(frozen=True)
class Sentence:
    text: str
    terminator: str


def tokenize(text: str) -> tuple[list[str], list[Sentence]]:
    folded = text.casefold()
    tokens = []
    for run in _WORD_RE.findall(folded):
        word = run.strip("'")
        if word:
            tokens.append(word)

    sentences = []
    pos = 0
    for m in _SENTENCE_RE.finditer(text):
        chunk = text[pos : m.start()]
        if _WORD_RE.search(chunk.casefold()):
            sentences.append(Sentence(chunk + m.group(), m.group()))
        pos = m.end()
    tail = text[pos:]
    if _WORD_RE.search(tail.casefold()):
        sentences.append(Sentence(tail, ""))
    return tokens, sentences


def _load_emoticons() -> list[str]:
    data = resources.files("blindprofile").joinpath("data/emoticons.txt").read_text()
    entries = [line.strip() for line in data.splitlines() if line.strip()]
    return sorted(entries, key=len, reverse=True)


_EMOTICONS: list[str] | None = None


def count_emoticons(text: str) -> int:
    global _EMOTICONS
    if _EMOTICONS is None:
        _EMOTICONS = _load_emoticons()
    count = 0
    pos = 0
    while pos < len(text):
        for emo in _EMOTICONS:
            if text.startswith(emo, pos):
                count += 1
                pos += len(emo)
                break
        else:
            pos += 1
    return count


def liwc_standard_features(text: str) -> list[float]:
    """The 19 standard counts, in LIWC_FEATURES order."""
    tokens, sentences = tokenize(text)
    counts = {c: 0 for c in ("?", ".", ",", ":", ";", "!", "dash", "quote", "apos", "paren", "other")}
    for ch in text:
        if ch == "?":
            counts["?"] += 1
        elif ch == ".":
            counts["."] += 1
        elif ch == ",":
            counts[","] += 1
        elif ch == ":":
            counts[":"] += 1
        elif ch == ";":
            counts[";"] += 1
        elif ch == "!":
            counts["!"] += 1
        elif ch in _DASHES:
            counts["dash"] += 1
        elif ch in _QUOTES:
            counts["quote"] += 1
        elif ch in _APOSTROPHES:
            counts["apos"] += 1
        elif ch in "()":
            counts["paren"] += 1
        elif ch in _OTHER_PUNCT:
            counts["other"] += 1
    all_punct = sum(counts.values())
    six_letter = sum(1 for t in tokens if sum(c.isalpha() for c in t) > 6)
    return [
        float(len(tokens)),
        len(tokens) / max(len(sentences), 1),
        float(len(set(tokens))),
        float(six_letter),
        float(len(_ABBREV_RE.findall(text))),
        float(count_emoticons(text)),
        float(counts["?"]),
        float(counts["."]),
        float(counts[","]),
        float(counts[":"]),
        float(counts[";"]),
        float(counts["!"]),
        float(counts["dash"]),
        float(counts["quote"]),
        float(counts["apos"]),
        float(counts["paren"]),
        float(counts["other"]),
        float(all_punct),
        float(sum(1 for s in sentences if "?" in s.terminator)),
    ]


class MrcLexicon:
    """word -> 14 optional attribute values; 0 or blank columns mean the
    attribute is absent for that word."""

    def __init__(self, entries: dict[str, tuple[float | None, ...]]):
        self.entries = entries

    @classmethod
    def load(cls, path: str) -> "MrcLexicon":
        entries: dict[str, tuple[float | None, ...]] = {}
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    if not line or line.startswith("#"):
                        continue
                    parts = line.split("\t")
                    if len(parts) != 1 + len(MRC_ATTRIBUTES):
                        raise ParseError(
                            f"{path}:{lineno}: expected word + {len(MRC_ATTRIBUTES)} columns"
                        )
                    vals = []
                    for col in parts[1:]:
                        col = col.strip()
                        if col in ("", "0", "0.0"):
                            vals.append(None)
                        else:
                            try:
                                vals.append(float(col))
                            except ValueError as exc:
                                raise ParseError(f"{path}:{lineno}: bad number {col!r}") from exc
                    entries[parts[0].casefold()] = tuple(vals)
        except OSError as exc:
            raise ParseError(f"cannot read MRC lexicon {path}: {exc}") from exc
        return cls(entries)


class NrcLexicon:
    """word -> set of categories, from the standard word/category/flag triples."""

    def __init__(self, entries: dict[str, frozenset[str]]):
        self.entries = entries

    @classmethod
    def load(cls, path: str) -> "NrcLexicon":
        raw: dict[str, set[str]] = {}
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    parts = line.split("\t")
                    if len(parts) != 3:
                        raise ParseError(f"{path}:{lineno}: expected word/category/flag")
                    word, category, flag = parts
                    if category not in NRC_CATEGORIES:
                        raise ParseError(f"{path}:{lineno}: unknown category {category!r}")
                    if flag not in ("0", "1"):
                        raise ParseError(f"{path}:{lineno}: flag must be 0 or 1")
                    if flag == "1":
                        raw.setdefault(word.casefold(), set()).add(category)
        except OSError as exc:
            raise ParseError(f"cannot read NRC lexicon {path}: {exc}") from exc
        return cls({w: frozenset(cats) for w, cats in raw.items()})


def mrc_features(tokens: list[str], lexicon: MrcLexicon | None) -> list[float]:
    """Per attribute, the mean over tokens carrying that attribute."""
    if lexicon is None:
        raise LexiconMissing("MRC lexicon not loaded")
    sums = [0.0] * len(MRC_ATTRIBUTES)
    hits = [0] * len(MRC_ATTRIBUTES)
    for token in tokens:
        entry = lexicon.entries.get(token)
        if entry is None:
            continue
        for i, val in enumerate(entry):
            if val is not None:
                sums[i] += val
                hits[i] += 1
    return [s / h if h else 0.0 for s, h in zip(sums, hits)]


def nrc_features(tokens: list[str], lexicon: NrcLexicon | None) -> list[float]:
    """Raw word counts per emotion/sentiment category."""
    if lexicon is None:
        raise LexiconMissing("NRC lexicon not loaded")
    counts = dict.fromkeys(NRC_CATEGORIES, 0)
    for token in tokens:
        for category in lexicon.entries.get(token, ()):
            counts[category] += 1
    return [float(counts[c]) for c in NRC_CATEGORIES]


def text_features(text: str, mrc: MrcLexicon | None, nrc: NrcLexicon | None) -> list[float]:
    """The full 43-dimensional text vector: MRC, then NRC, then LIWC."""
    tokens, _ = tokenize(text)
    vec = mrc_features(tokens, mrc) + nrc_features(tokens, nrc) + liwc_standard_features(text)
    assert len(vec) == TEXT_DIM
    return vec


def load_landmarks(path: str) -> list[float]:
    """136 reals: one per line, or a single comma-separated row."""
    try:
        with open(path, encoding="utf-8") as fh:
            content = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read landmarks {path}: {exc}") from exc
    fields = [f for f in re.split(r"[,\s]+", content) if f]
    values = []
    for f in fields:
        try:
            values.append(float(f))
        except ValueError as exc:
            raise ParseError(f"bad landmark value {f!r} in {path}") from exc
    if len(values) != LANDMARK_DIM:
        raise BadDimension(f"{path}: expected {LANDMARK_DIM} values, got {len(values)}")
    return values


def normalize(values: list[float], means: list[float], stds: list[float]) -> list[float]:
    """(v - mean) / max(std, 1e-9), elementwise."""
    if not len(values) == len(means) == len(stds):
        raise BadDimension(
            f"vector/stats lengths differ: {len(values)}/{len(means)}/{len(stds)}"
        )
    return [(v - m) / max(s, 1e-9) for v, m, s in zip(values, means, stds)]
