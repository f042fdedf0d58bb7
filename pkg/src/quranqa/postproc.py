"""Refinement chain for candidate spans: NMS, uninformative-answer filter, re-rank."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .align import CandidateSpan
from .config import read_toml
from .text import (
    ANSWER_OPTS,
    bag_f1,
    load_stopwords,
    normalized_tokens,
    stopword_ratio,
    tokenize,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PostprocConfig:
    nms_overlap_threshold: float = 0.5
    question_sim_threshold: float = 0.6
    stopword_ratio_threshold: float = 0.75
    k: int = 10
    stoplist: str | None = None

    def __post_init__(self):
        # an NMS threshold above 1 disables suppression, since overlap never exceeds 1
        if self.nms_overlap_threshold < 0.0:
            raise ValueError(f"nms_overlap_threshold must be >= 0, got {self.nms_overlap_threshold}")
        for name in ("question_sim_threshold", "stopword_ratio_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RankedAnswerList:
    pq_id: str
    spans: list[CandidateSpan] = field(default_factory=list)


@dataclass
class PostprocStats:
    nms_suppressed: int = 0
    question_echo: int = 0
    stopwords: int = 0
    truncated: int = 0

    def add(self, other: PostprocStats) -> None:
        self.nms_suppressed += other.nms_suppressed
        self.question_echo += other.question_echo
        self.stopwords += other.stopwords
        self.truncated += other.truncated


def rank_key(span: CandidateSpan) -> tuple:
    return (-span.score, span.start_token, span.end_token, span.origin)


def overlap(a: CandidateSpan, b: CandidateSpan) -> float:
    """Shared tokens over the shorter span's length."""
    lo = max(a.start_token, b.start_token)
    hi = min(a.end_token, b.end_token)
    if hi < lo:
        return 0.0
    return (hi - lo + 1) / min(len(a), len(b))


def suppresses(ov: float, threshold: float) -> bool:
    # disjoint spans never suppress each other, even at threshold 0
    return ov > 0.0 and ov >= threshold


def nms(spans: Sequence[CandidateSpan], threshold: float) -> list[CandidateSpan]:
    kept: list[CandidateSpan] = []
    for span in sorted(spans, key=rank_key):
        if not any(suppresses(overlap(span, k), threshold) for k in kept):
            kept.append(span)
    return kept


def filter_uninformative(
    spans: Sequence[CandidateSpan],
    question: str,
    cfg: PostprocConfig,
    drops: list[tuple[CandidateSpan, str]] | None = None,
) -> list[CandidateSpan]:
    """Drop spans that echo the question or consist mostly of stopwords."""
    stoplist = load_stopwords(cfg.stoplist)
    q_tokens = normalized_tokens(question, ANSWER_OPTS)
    kept = []
    for span in spans:
        tokens = tokenize(span.text, ANSWER_OPTS)
        reason = None
        if bag_f1([t.norm for t in tokens], q_tokens) >= cfg.question_sim_threshold:
            reason = "question_echo"
        elif stopword_ratio(tokens, stoplist) >= cfg.stopword_ratio_threshold:
            reason = "stopwords"
        if reason is None:
            kept.append(span)
            continue
        log.debug("%s: dropped %r (%s)", span.pq_id, span.text, reason)
        if drops is not None:
            drops.append((span, reason))
    return kept


def run_pipeline(
    candidates: Sequence[CandidateSpan],
    question: str,
    cfg: PostprocConfig,
    stats: PostprocStats | None = None,
    pq_id: str | None = None,
) -> RankedAnswerList:
    if pq_id is None:
        pq_id = candidates[0].pq_id if candidates else ""
    stats = stats if stats is not None else PostprocStats()
    survivors = nms(candidates, cfg.nms_overlap_threshold)
    stats.nms_suppressed += len(candidates) - len(survivors)
    drops: list[tuple[CandidateSpan, str]] = []
    survivors = filter_uninformative(survivors, question, cfg, drops)
    for _, reason in drops:
        if reason == "question_echo":
            stats.question_echo += 1
        else:
            stats.stopwords += 1
    ranked = sorted(survivors, key=rank_key)
    stats.truncated += max(0, len(ranked) - cfg.k)
    return RankedAnswerList(pq_id, ranked[: cfg.k])


def load_postproc_config(path: str | Path | None, **overrides) -> PostprocConfig:
    """Read the ``[postproc]`` table of a TOML file; non-None overrides win."""
    values: dict = {}
    if path is not None:
        values.update(read_toml(path).get("postproc", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = PostprocConfig.__dataclass_fields__
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown postproc keys: {sorted(unknown)}")
    return PostprocConfig(**values)
