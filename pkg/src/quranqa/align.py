"""Map answer strings and n-best offsets onto word-aligned passage spans."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import QPARecord
from .errors import DataError
from .text import ANSWER_OPTS, Token, bag_f1, normalize, tokenize

DEFAULT_MIN_FUZZY_F1 = 0.8
FUZZY_WIDTH_SLACK = 2


@dataclass(frozen=True)
class CandidateSpan:
    text: str
    start_token: int
    end_token: int  # inclusive
    score: float
    origin: str  # "llm" | "nbest"
    pq_id: str

    @property
    def token_set(self) -> set[int]:
        return set(range(self.start_token, self.end_token + 1))

    def __len__(self) -> int:
        return self.end_token - self.start_token + 1


def span_text(passage: str, tokens: Sequence[Token], start: int, end: int) -> str:
    return passage[tokens[start].start_char : tokens[end].end_char]


def make_span(
    passage: str,
    tokens: Sequence[Token],
    start: int,
    end: int,
    score: float,
    origin: str,
    pq_id: str,
) -> CandidateSpan:
    if not 0 <= start <= end < len(tokens):
        raise DataError(f"{pq_id}: token range ({start}, {end}) outside passage of {len(tokens)} tokens")
    if origin == "llm" and not 0.0 <= score <= 1.0:
        raise DataError(f"{pq_id}: llm score {score} outside [0, 1]")
    if not math.isfinite(score):
        raise DataError(f"{pq_id}: non-finite score {score}")
    return CandidateSpan(
        span_text(passage, tokens, start, end), start, end, float(score), origin, pq_id
    )


@dataclass
class AlignCounter:
    exact: int = 0
    fuzzy: int = 0
    failed: int = 0

    def add(self, other: AlignCounter) -> None:
        self.exact += other.exact
        self.fuzzy += other.fuzzy
        self.failed += other.failed

    @property
    def total(self) -> int:
        return self.exact + self.fuzzy + self.failed

    @property
    def drop_rate(self) -> float:
        return self.failed / self.total if self.total else 0.0


@dataclass(frozen=True)
class AlignResult:
    start_token: int
    end_token: int
    stage: str  # "exact" | "fuzzy"
    f1: float


def _match_keys(tokens: Sequence[Token]) -> tuple[list[str], list[int]]:
    # Punctuation-free keys; punctuation-only tokens are skipped, positions kept.
    keys, positions = [], []
    for tok in tokens:
        key = normalize(tok.norm, ANSWER_OPTS)
        if key:
            keys.append(key)
            positions.append(tok.index)
    return keys, positions


def locate_answer(
    candidate: str,
    passage_tokens: Sequence[Token],
    min_fuzzy_f1: float = DEFAULT_MIN_FUZZY_F1,
) -> AlignResult | None:
    """Find the token range of ``candidate`` inside the passage.

    Exact stage: first contiguous occurrence of the candidate's normalized
    tokens. Fuzzy stage: the window of width ``len(candidate) +/- 2`` with the
    highest bag-of-tokens F1, kept only when F1 >= ``min_fuzzy_f1``; ties go to
    the earliest start, then the shorter window.
    """
    cand = [t.norm for t in tokenize(candidate, ANSWER_OPTS)]
    keys, positions = _match_keys(passage_tokens)
    if not cand or not keys:
        return None
    m, n = len(cand), len(keys)
    for i in range(n - m + 1):
        if keys[i : i + m] == cand:
            return AlignResult(positions[i], positions[i + m - 1], "exact", 1.0)

    cand_bag = Counter(cand)
    if not any(k in cand_bag for k in keys):
        return None
    best: tuple[float, int, int] | None = None
    for width in range(max(1, m - FUZZY_WIDTH_SLACK), min(n, m + FUZZY_WIDTH_SLACK) + 1):
        for i in range(n - width + 1):
            f1 = bag_f1(keys[i : i + width], cand)
            key = (-f1, i, width)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    f1, i, width = -best[0], best[1], best[2]
    if f1 <= 0.0 or f1 < min_fuzzy_f1:
        return None
    return AlignResult(positions[i], positions[i + width - 1], "fuzzy", f1)


def align_answer(
    candidate: str,
    passage_tokens: Sequence[Token],
    min_fuzzy_f1: float = DEFAULT_MIN_FUZZY_F1,
    *,
    passage: str,
    pq_id: str = "",
    score: float = 1.0,
    counter: AlignCounter | None = None,
) -> CandidateSpan | None:
    """Align one LLM answer string; the returned text is re-read from ``passage``."""
    if not passage_tokens:
        raise ValueError("passage_tokens must be non-empty")
    found = locate_answer(candidate, passage_tokens, min_fuzzy_f1)
    if counter is not None:
        if found is None:
            counter.failed += 1
        elif found.stage == "exact":
            counter.exact += 1
        else:
            counter.fuzzy += 1
    if found is None:
        return None
    return make_span(
        passage, passage_tokens, found.start_token, found.end_token, score, "llm", pq_id
    )


def rank_scores(m: int) -> list[float]:
    """Scores (m - r + 1) / m for ranks r = 1..m."""
    return [(m - r + 1) / m for r in range(1, m + 1)]


def align_llm_answers(
    answers: Sequence[str],
    record: QPARecord,
    tokens: Sequence[Token],
    min_fuzzy_f1: float = DEFAULT_MIN_FUZZY_F1,
    counter: AlignCounter | None = None,
) -> list[CandidateSpan]:
    spans = []
    if not tokens:
        return spans
    for text, score in zip(answers, rank_scores(len(answers))):
        span = align_answer(
            text,
            tokens,
            min_fuzzy_f1,
            passage=record.passage,
            pq_id=record.pq_id,
            score=score,
            counter=counter,
        )
        if span is not None:
            spans.append(span)
    return spans


def snap_to_word_boundaries(
    raw: tuple[int, int], tokens: Sequence[Token]
) -> tuple[int, int]:
    """Expand a half-open character range to the tokens it touches."""
    start, end = raw
    hit = [t.index for t in tokens if t.start_char < end and t.end_char > start]
    if not hit:
        raise DataError(f"character range {raw} overlaps no token")
    return hit[0], hit[-1]


def _nbest_entry(
    entry: Mapping, rec: QPARecord, tokens: Sequence[Token]
) -> CandidateSpan:
    pq_id = rec.pq_id
    try:
        score = float(entry["score"])
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{pq_id}: n-best entry without numeric score: {entry!r}") from None
    if "start_char" in entry and "end_char" in entry:
        start, end = int(entry["start_char"]), int(entry["end_char"])
        if not 0 <= start < end <= len(rec.passage):
            raise DataError(
                f"{pq_id}: character span ({start}, {end}) outside passage of length {len(rec.passage)}"
            )
        try:
            s_tok, e_tok = snap_to_word_boundaries((start, end), tokens)
        except DataError:
            raise DataError(f"{pq_id}: character span ({start}, {end}) covers no word") from None
    elif "start_token" in entry and "end_token" in entry:
        s_tok, e_tok = int(entry["start_token"]), int(entry["end_token"])
        if not 0 <= s_tok <= e_tok < len(tokens):
            raise DataError(
                f"{pq_id}: token span ({s_tok}, {e_tok}) outside passage of {len(tokens)} tokens"
            )
    else:
        raise DataError(f"{pq_id}: n-best entry needs start/end offsets: {entry!r}")
    return make_span(rec.passage, tokens, s_tok, e_tok, score, "nbest", pq_id)


def load_nbest(
    path: str | Path, corpus: Iterable[QPARecord], n: int = 10
) -> dict[str, list[CandidateSpan]]:
    """Read an n-best file, keeping the first ``n`` candidates per question."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read n-best file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: n-best file must map pq_id to a candidate list")
    by_id = {r.pq_id: r for r in corpus}
    out: dict[str, list[CandidateSpan]] = {}
    for pq_id, entries in data.items():
        rec = by_id.get(pq_id)
        if rec is None:
            raise DataError(f"{path}: unknown pq_id {pq_id}")
        if not isinstance(entries, list):
            raise DataError(f"{path}: {pq_id}: candidates must be a list")
        tokens = tokenize(rec.passage)
        out[pq_id] = [_nbest_entry(e, rec, tokens) for e in entries[:n]]
    return out
