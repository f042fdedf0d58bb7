"""Unified question-passage-answer corpus: loading, adapters, merging, stats."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .errors import DataError

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
CATEGORIES = ("multi", "single", "zero")
SOURCES = ("qrcd", "quqa", "arcd", "other")
ADAPTERS = ("squad_style",)


@dataclass(frozen=True)
class GoldAnswer:
    text: str
    start_char: int

    @property
    def end_char(self) -> int:
        return self.start_char + len(self.text)


@dataclass(frozen=True)
class QPARecord:
    pq_id: str
    passage: str
    question: str
    answers: tuple[GoldAnswer, ...]
    split: str
    source: str
    tafsir: str | None = None

    @property
    def category(self) -> str:
        return answer_category(len(self.answers))


def answer_category(n_answers: int) -> str:
    if n_answers == 0:
        return "zero"
    return "single" if n_answers == 1 else "multi"


def check_answer(passage: str, answer: GoldAnswer) -> bool:
    return (
        bool(answer.text)
        and answer.start_char >= 0
        and passage[answer.start_char : answer.end_char] == answer.text
    )


def record_from_dict(
    obj: dict, split: str | None = None, source: str | None = None
) -> QPARecord:
    """Build a record from a unified (or native QRCD) JSON object.

    Raises ``DataError`` for missing fields or an answer whose text is not
    found at its ``start_char``.
    """
    if not isinstance(obj, dict):
        raise DataError("record is not a JSON object")
    try:
        pq_id = str(obj["pq_id"])
        passage = obj["passage"]
        question = obj["question"]
        raw_answers = obj.get("answers") or []
    except KeyError as exc:
        raise DataError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(passage, str) or not isinstance(question, str):
        raise DataError(f"{pq_id}: passage and question must be strings")
    answers = []
    for ans in raw_answers:
        try:
            gold = GoldAnswer(text=ans["text"], start_char=int(ans["start_char"]))
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{pq_id}: malformed answer {ans!r}") from None
        if not check_answer(passage, gold):
            raise DataError(
                f"{pq_id}: answer {gold.text!r} not found at start_char {gold.start_char}"
            )
        answers.append(gold)
    rec_split = split or obj.get("split")
    if rec_split not in SPLITS:
        raise DataError(f"{pq_id}: split must be one of {SPLITS}, got {rec_split!r}")
    return QPARecord(
        pq_id=pq_id,
        passage=passage,
        question=question,
        answers=tuple(answers),
        split=rec_split,
        source=obj.get("source") or source or "qrcd",
        tafsir=obj.get("tafsir"),
    )


def record_to_dict(rec: QPARecord) -> dict:
    out = {
        "pq_id": rec.pq_id,
        "passage": rec.passage,
        "question": rec.question,
        "answers": [{"text": a.text, "start_char": a.start_char} for a in rec.answers],
        "split": rec.split,
        "source": rec.source,
    }
    if rec.tafsir is not None:
        out["tafsir"] = rec.tafsir
    return out


def load_corpus(
    path: str | Path, split: str | None = None, source: str | None = None
) -> list[QPARecord]:
    """Load a unified-schema JSONL corpus.

    Native QRCD files (which lack ``split``/``source`` and carry extra
    ``surah``/``verses`` fields) load too; pass ``split`` to label them.
    """
    if split is not None and split not in SPLITS:
        raise DataError(f"unknown split {split!r}")
    records: list[QPARecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            try:
                rec = record_from_dict(obj, split=split, source=source)
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if rec.pq_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate pq_id {rec.pq_id}")
            seen.add(rec.pq_id)
            records.append(rec)
    return records


def dumps_corpus(records: Iterable[QPARecord]) -> str:
    return "".join(
        json.dumps(record_to_dict(r), ensure_ascii=False) + "\n" for r in records
    )


def write_corpus(records: Iterable[QPARecord], path: str | Path) -> None:
    Path(path).write_text(dumps_corpus(records), encoding="utf-8")


def _squad_records(data: dict, source: str, split: str) -> tuple[list[QPARecord], int]:
    records, dropped = [], 0
    for article in data.get("data", []):
        for para in article.get("paragraphs", []):
            context = para["context"]
            for qa in para.get("qas", []):
                answers: list[GoldAnswer] = []
                ok = True
                for ans in qa.get("answers", []):
                    gold = GoldAnswer(ans.get("text", ""), int(ans.get("answer_start", -1)))
                    if not check_answer(context, gold):
                        ok = False
                        break
                    if gold not in answers:
                        answers.append(gold)
                if qa.get("is_impossible"):
                    answers = []
                if not ok:
                    dropped += 1
                    log.debug("dropping %s: answer offset mismatch", qa.get("id"))
                    continue
                records.append(
                    QPARecord(
                        pq_id=str(qa["id"]),
                        passage=context,
                        question=qa["question"],
                        answers=tuple(answers),
                        split=split,
                        source=source,
                    )
                )
    return records, dropped


def reformat_external(
    path: str | Path,
    adapter: str = "squad_style",
    source: str = "other",
    split: str = "train",
) -> tuple[list[QPARecord], int]:
    """Convert an external QA dataset into unified records.

    Returns the records and the number of questions dropped because an answer
    offset could not be verified.
    """
    if adapter not in ADAPTERS:
        raise DataError(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        records, dropped = _squad_records(data, source, split)
    except (KeyError, TypeError, AttributeError) as exc:
        raise DataError(f"{path}: not SQuAD-style input ({exc!r})") from None
    if dropped:
        log.info("%s: dropped %d records with unverifiable offsets", path, dropped)
    return records, dropped


def merge_corpora(corpora: Iterable[Iterable[QPARecord]]) -> list[QPARecord]:
    merged: list[QPARecord] = []
    seen: set[str] = set()
    for corpus in corpora:
        for rec in corpus:
            pq_id = rec.pq_id
            if pq_id in seen:
                pq_id = f"{rec.source}/{rec.pq_id}"
                n = 2
                while pq_id in seen:
                    pq_id = f"{rec.source}/{rec.pq_id}#{n}"
                    n += 1
                rec = replace(rec, pq_id=pq_id)
            seen.add(pq_id)
            merged.append(rec)
    return merged


def _percent(count: int, total: int) -> int:
    # round half up, integer arithmetic
    return (200 * count + total) // (2 * total) if total else 0


@dataclass
class SplitStats:
    counts: dict[str, dict[str, int]] = field(
        default_factory=lambda: {s: {c: 0 for c in CATEGORIES} for s in SPLITS}
    )
    qpa_by_category: dict[str, int] = field(
        default_factory=lambda: {c: 0 for c in CATEGORIES}
    )

    @property
    def qp_total(self) -> int:
        return sum(self.category_total(c) for c in CATEGORIES)

    @property
    def qpa_total(self) -> int:
        return sum(self.qpa_by_category.values())

    def split_total(self, split: str) -> int:
        return sum(self.counts[split].values())

    def category_total(self, category: str) -> int:
        return sum(self.counts[s][category] for s in SPLITS)

    def percent(self, split: str | None, category: str) -> int:
        if split is None:
            return _percent(self.category_total(category), self.qp_total)
        return _percent(self.counts[split][category], self.split_total(split))

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "qp_total": self.qp_total,
            "qpa_by_category": self.qpa_by_category,
            "qpa_total": self.qpa_total,
        }

    def render_table(self) -> str:
        head = f"{'Type':<14}" + "".join(f"{s.title():>13}" for s in SPLITS)
        lines = [head + f"{'All':>13}{'QPA':>13}"]
        for cat in CATEGORIES:
            row = f"{cat.title() + '-answer':<14}"
            for s in SPLITS:
                row += f"{self.counts[s][cat]:>7,} ({self.percent(s, cat):>2}%)"
            row += f"{self.category_total(cat):>7,} ({self.percent(None, cat):>2}%)"
            qpa = self.qpa_by_category[cat]
            row += f"{qpa:>7,} ({_percent(qpa, self.qpa_total):>2}%)"
            lines.append(row)
        total = f"{'Total':<14}" + "".join(f"{self.split_total(s):>13,}" for s in SPLITS)
        lines.append(total + f"{self.qp_total:>13,}{self.qpa_total:>13,}")
        return "\n".join(lines)


def split_stats(records: Iterable[QPARecord]) -> SplitStats:
    stats = SplitStats()
    for rec in records:
        cat = rec.category
        stats.counts[rec.split][cat] += 1
        stats.qpa_by_category[cat] += max(1, len(rec.answers))
    return stats
