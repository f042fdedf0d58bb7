"""Arabic normalization, offset-preserving tokenization and overlap measures."""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

# Harakat, hamza/maddah marks, superscript alef and the Qur'anic annotation signs.
DIACRITIC_RANGES = (
    (0x0610, 0x061A),
    (0x064B, 0x065F),
    (0x0670, 0x0670),
    (0x06D6, 0x06DC),
    (0x06DF, 0x06E4),
    (0x06E7, 0x06E8),
    (0x06EA, 0x06ED),
)
TATWEEL = "ـ"

_DIACRITICS = {cp: None for lo, hi in DIACRITIC_RANGES for cp in range(lo, hi + 1)}
_ALEF = str.maketrans({"أ": "ا", "إ": "ا", "آ": "ا", "ٱ": "ا"})
_YA_TA = str.maketrans({"ى": "ي", "ة": "ه"})


@dataclass(frozen=True)
class NormOptions:
    strip_diacritics: bool = True
    unify_alef: bool = True
    unify_ya_and_ta_marbuta: bool = True
    strip_tatweel: bool = True
    collapse_whitespace: bool = True
    strip_quotes_punct: bool = False


DEFAULT_OPTS = NormOptions()
# Used for candidate answers and questions, which carry quotes and "؟".
ANSWER_OPTS = NormOptions(strip_quotes_punct=True)


@dataclass(frozen=True)
class Token:
    surface: str
    start_char: int
    end_char: int
    norm: str
    index: int


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def normalize(text: str, opts: NormOptions = DEFAULT_OPTS) -> str:
    if opts.strip_diacritics:
        text = text.translate(_DIACRITICS)
    if opts.strip_tatweel:
        text = text.replace(TATWEEL, "")
    if opts.unify_alef:
        text = text.translate(_ALEF)
    if opts.unify_ya_and_ta_marbuta:
        text = text.translate(_YA_TA)
    if opts.strip_quotes_punct:
        text = "".join(ch for ch in text if not _is_punct(ch))
    if opts.collapse_whitespace:
        text = " ".join(text.split())
    return text


def tokenize(text: str, opts: NormOptions = DEFAULT_OPTS) -> list[Token]:
    """Split ``text`` on whitespace, keeping offsets into the original string.

    Chunks whose normalized form is empty (a stray diacritic, or punctuation
    when ``strip_quotes_punct`` is set) are not emitted; they stay part of the
    gap between neighbouring tokens.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        surface = text[i:j]
        norm = normalize(surface, opts)
        if norm:
            tokens.append(Token(surface, i, j, norm, len(tokens)))
        i = j
    return tokens


def normalized_tokens(text: str, opts: NormOptions = DEFAULT_OPTS) -> list[str]:
    return [t.norm for t in tokenize(text, opts)]


def token_f1(a: Iterable[int], b: Iterable[int]) -> float:
    """Positional F1 between two token index sets of the same passage."""
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0
    common = len(a & b)
    if common == 0:
        return 0.0
    precision = common / len(a)
    recall = common / len(b)
    return 2 * precision * recall / (precision + recall)


def bag_f1(a: Sequence[str], b: Sequence[str]) -> float:
    """SQuAD-style F1 over multisets of normalized tokens."""
    if not a or not b:
        return 0.0
    common = sum((Counter(a) & Counter(b)).values())
    if common == 0:
        return 0.0
    precision = common / len(a)
    recall = common / len(b)
    return 2 * precision * recall / (precision + recall)


def stopword_ratio(tokens: Sequence[Token], stoplist: set[str] | frozenset[str]) -> float:
    if not tokens:
        return 1.0
    return sum(1 for t in tokens if t.norm in stoplist) / len(tokens)


def parse_stopwords(lines: Iterable[str]) -> frozenset[str]:
    words = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(normalize(line, ANSWER_OPTS))
    words.discard("")
    return frozenset(words)


@lru_cache(maxsize=8)
def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line, ``#`` comments).

    ``None`` loads the bundled Arabic list. Entries are normalized on load so a
    hand-edited list with diacritics or hamza variants still matches.
    """
    if path is None:
        content = resources.files("quranqa.resources").joinpath("stopwords_ar.txt")
        return parse_stopwords(content.read_text(encoding="utf-8").splitlines())
    return parse_stopwords(Path(path).read_text(encoding="utf-8").splitlines())
