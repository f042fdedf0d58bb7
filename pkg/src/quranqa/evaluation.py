"""Partial average precision at rank k (pAP@k) and evaluation reports."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Protocol, Sequence

from .align import snap_to_word_boundaries
from .corpus import CATEGORIES, GoldAnswer, QPARecord
from .errors import DataError
from .runfile import Run
from .text import Token, token_f1, tokenize

log = logging.getLogger(__name__)

MATCHING = ("greedy", "optimal")


class SpanLike(Protocol):
    start_token: int
    end_token: int


def _indices(span: SpanLike) -> range:
    return range(span.start_token, span.end_token + 1)


def gold_token_ranges(
    golds: Sequence[GoldAnswer], tokens: Sequence[Token]
) -> list[tuple[int, int]]:
    """Word-snapped gold ranges in canonical (start, end) order."""
    return sorted(snap_to_word_boundaries((g.start_char, g.end_char), tokens) for g in golds)


def partial_match_matrix(
    preds: Sequence[SpanLike], golds: Sequence[GoldAnswer], tokens: Sequence[Token]
) -> list[list[float]]:
    ranges = gold_token_ranges(golds, tokens)
    return [
        [token_f1(_indices(p), range(s, e + 1)) for s, e in ranges] for p in preds
    ]


def pap_greedy(matrix: Sequence[Sequence[float]], n_golds: int) -> float:
    """Each rank takes the best still-unused gold (lowest index on ties)."""
    if n_golds == 0:
        return 1.0 if not matrix else 0.0
    used: set[int] = set()
    cum = total = 0.0
    for rank, row in enumerate(matrix, start=1):
        best, best_j = 0.0, None
        for j, value in enumerate(row):
            if j not in used and value > best:
                best, best_j = value, j
        if best_j is not None:
            used.add(best_j)
            cum += best
            total += cum / rank
    return total / n_golds


def pap_optimal(matrix: Sequence[Sequence[float]], n_golds: int) -> float:
    """Best score over all one-to-one assignments of predictions to golds."""
    if n_golds == 0:
        return 1.0 if not matrix else 0.0

    def search(i: int, used: frozenset, cum: float, acc: float) -> float:
        if i == len(matrix):
            return acc
        best = search(i + 1, used, cum, acc)
        for j, value in enumerate(matrix[i]):
            if value > 0 and j not in used:
                c = cum + value
                best = max(best, search(i + 1, used | {j}, c, acc + c / (i + 1)))
        return best

    return search(0, frozenset(), 0.0, 0.0) / n_golds


def pap_at_k(
    preds: Sequence[SpanLike],
    golds: Sequence[GoldAnswer],
    tokens: Sequence[Token],
    k: int = 10,
    matching: str = "greedy",
) -> float:
    if len(preds) > k:
        raise DataError(f"{len(preds)} predictions exceed k={k}")
    matrix = partial_match_matrix(preds, golds, tokens)
    if matching == "greedy":
        return pap_greedy(matrix, len(golds))
    if matching == "optimal":
        return pap_optimal(matrix, len(golds))
    raise ValueError(f"matching must be one of {MATCHING}")


@dataclass
class EvalReport:
    per_question: dict[str, float]
    macro_pap: float
    by_category: dict[str, float]
    k: int = 10
    category_counts: dict[str, int] = field(default_factory=dict)
    drop_counts: dict = field(default_factory=dict)
    system: str = ""
    system_type: str = ""
    matching: str = "greedy"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> EvalReport:
        return cls(**data)


def evaluate_run(
    run: Run,
    corpus: Iterable[QPARecord],
    k: int = 10,
    *,
    split: str | None = None,
    exclude: Iterable[str] = (),
    matching: str = "greedy",
) -> EvalReport:
    """Score ``run`` against every corpus question (optionally one split).

    Questions absent from the run count as empty predictions. A pq_id in the
    run that the corpus does not know is an error; one that belongs to another
    split is ignored.
    """
    records = list(corpus)
    known = {r.pq_id for r in records}
    unknown = sorted(set(run) - known)
    if unknown:
        raise DataError(f"run references unknown pq_id(s): {', '.join(unknown[:5])}")
    skip = set(exclude)
    scored = [r for r in records if (split is None or r.split == split) and r.pq_id not in skip]

    per_question: dict[str, float] = {}
    by_cat: dict[str, list[float]] = {c: [] for c in CATEGORIES}
    for rec in scored:
        tokens = tokenize(rec.passage)
        preds = run.get(rec.pq_id, [])
        for p in preds:
            if p.end_token >= len(tokens):
                raise DataError(f"{rec.pq_id}: prediction token range out of bounds")
        try:
            score = pap_at_k(preds, rec.answers, tokens, k, matching)
        except DataError as exc:
            raise DataError(f"{rec.pq_id}: {exc}") from None
        per_question[rec.pq_id] = score
        by_cat[rec.category].append(score)

    macro = sum(per_question.values()) / len(per_question) if per_question else 0.0
    if not per_question:
        log.warning("no questions scored")
    return EvalReport(
        per_question=per_question,
        macro_pap=macro,
        by_category={c: (sum(v) / len(v) if v else 0.0) for c, v in by_cat.items()},
        k=k,
        category_counts={c: len(v) for c, v in by_cat.items()},
        matching=matching,
    )


def render_report(report: EvalReport, fmt: str = "table") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    metric = f"pAP@{report.k}"
    system = report.system or "run"
    width = max(30, len(system) + 2)
    lines = [
        f"{'System':<{width}}{'Type':<16}{metric:>8}",
        f"{'-' * (width - 2):<{width}}{'-' * 14:<16}{'-' * 8:>8}",
        f"{system:<{width}}{report.system_type or '-':<16}{report.macro_pap:>8.3f}",
        "",
        f"{'Category':<12}{'Questions':>10}{metric:>10}",
    ]
    for cat in CATEGORIES:
        n = report.category_counts.get(cat, 0)
        lines.append(f"{cat:<12}{n:>10}{report.by_category.get(cat, 0.0):>10.3f}")
    lines.append(f"{'all':<12}{len(report.per_question):>10}{report.macro_pap:>10.3f}")
    if not report.per_question:
        lines.append("warning: no questions were scored; macro shown as 0.000")
    if report.drop_counts:
        lines.append("")
        for key in sorted(report.drop_counts):
            lines.append(f"{key}: {report.drop_counts[key]}")
    return "\n".join(lines) + "\n"


def render_comparison(report: EvalReport, baseline: EvalReport) -> str:
    metric = f"pAP@{report.k}"
    lines = [f"{metric:<12}{'run':>10}{'baseline':>10}{'delta':>10}"]
    rows = [("all", report.macro_pap, baseline.macro_pap)]
    rows += [(c, report.by_category.get(c, 0.0), baseline.by_category.get(c, 0.0)) for c in CATEGORIES]
    for name, ours, theirs in rows:
        lines.append(f"{name:<12}{ours:>10.3f}{theirs:>10.3f}{ours - theirs:>+10.3f}")
    return "\n".join(lines) + "\n"
