"""Run-file I/O: per-question ranked answers keyed by pq_id."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .align import CandidateSpan, snap_to_word_boundaries, span_text
from .corpus import QPARecord
from .errors import DataError
from .text import tokenize


@dataclass(frozen=True)
class RunEntry:
    answer: str
    rank: int
    score: float
    start_token: int
    end_token: int

    def to_dict(self) -> dict:
        return {
            "answer": self.answer,
            "rank": self.rank,
            "score": self.score,
            "start_token": self.start_token,
            "end_token": self.end_token,
        }


Run = dict[str, list[RunEntry]]


def entries_from_spans(spans: Iterable[CandidateSpan]) -> list[RunEntry]:
    return [
        RunEntry(s.text, rank, s.score, s.start_token, s.end_token)
        for rank, s in enumerate(spans, start=1)
    ]


def dumps_run(run: Mapping[str, Iterable[RunEntry]]) -> str:
    payload = {pq_id: [e.to_dict() for e in entries] for pq_id, entries in run.items()}
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def write_run(run: Mapping[str, Iterable[RunEntry]], path: str | Path) -> None:
    Path(path).write_text(dumps_run(run), encoding="utf-8", newline="\n")


def _entry(obj, pq_id: str) -> RunEntry:
    if not isinstance(obj, dict):
        raise DataError(f"{pq_id}: run entry is not an object")
    try:
        entry = RunEntry(
            answer=str(obj["answer"]),
            rank=int(obj["rank"]),
            score=float(obj["score"]),
            start_token=int(obj["start_token"]),
            end_token=int(obj["end_token"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{pq_id}: malformed run entry {obj!r} ({exc!r})") from None
    if entry.rank < 1 or entry.start_token < 0 or entry.end_token < entry.start_token:
        raise DataError(f"{pq_id}: invalid rank or token range in {obj!r}")
    return entry


def parse_run(data) -> Run:
    if not isinstance(data, dict):
        raise DataError("run file must be a JSON object mapping pq_id to answers")
    run: Run = {}
    for pq_id, entries in data.items():
        if not isinstance(entries, list):
            raise DataError(f"{pq_id}: answers must be a list")
        parsed = sorted((_entry(e, pq_id) for e in entries), key=lambda e: e.rank)
        ranks = [e.rank for e in parsed]
        if len(set(ranks)) != len(ranks):
            raise DataError(f"{pq_id}: duplicate ranks {ranks}")
        run[pq_id] = parsed
    return run


def load_run(path: str | Path) -> Run:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read run file {path}: {exc}") from None
    return parse_run(data)


def validate_run(run: Run, corpus: Iterable[QPARecord], k: int = 10) -> None:
    """Check every entry is an exact, in-bounds passage span and lists fit in ``k``."""
    by_id = {r.pq_id: r for r in corpus}
    for pq_id, entries in run.items():
        rec = by_id.get(pq_id)
        if rec is None:
            raise DataError(f"run references unknown pq_id {pq_id}")
        if len(entries) > k:
            raise DataError(f"{pq_id}: {len(entries)} answers exceed k={k}")
        tokens = tokenize(rec.passage)
        for e in entries:
            if e.end_token >= len(tokens):
                raise DataError(f"{pq_id}: token range ({e.start_token}, {e.end_token}) out of bounds")
            if span_text(rec.passage, tokens, e.start_token, e.end_token) != e.answer:
                raise DataError(f"{pq_id}: answer {e.answer!r} does not match its token range")


def gold_run(corpus: Iterable[QPARecord]) -> Run:
    """A run that reproduces every gold list in order (used for calibration)."""
    run: Run = {}
    for rec in corpus:
        tokens = tokenize(rec.passage)
        entries = []
        for rank, gold in enumerate(rec.answers, start=1):
            s, e = snap_to_word_boundaries((gold.start_char, gold.end_char), tokens)
            entries.append(RunEntry(span_text(rec.passage, tokens, s, e), rank, 1.0, s, e))
        run[rec.pq_id] = entries
    return run
