"""Prompt template, stratified few-shot selection and prompt rendering."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..config import read_toml
from ..corpus import QPARecord
from ..errors import DataError

DEFAULT_SEED = 109


@dataclass(frozen=True)
class PromptTemplate:
    header: str
    shot_block_format: str
    query_block_format: str
    no_answer_sentinel: str
    tafsir_format: str = "{tafsir}\n"

    def __post_init__(self):
        if self.no_answer_sentinel not in self.header:
            raise DataError("template header must contain the no-answer sentinel verbatim")

    @property
    def digest(self) -> str:
        parts = (
            self.header,
            self.shot_block_format,
            self.query_block_format,
            self.no_answer_sentinel,
            self.tafsir_format,
        )
        return hashlib.sha256("\x00".join(parts).encode("utf-8")).hexdigest()


def load_template(path: str | Path | None = None) -> PromptTemplate:
    """Load a TOML prompt template; ``None`` gives the bundled Arabic one."""
    if path is None:
        ref = resources.files("quranqa.resources").joinpath("template_ar.toml")
        with resources.as_file(ref) as p:
            data = read_toml(p)
    else:
        data = read_toml(path)
    fields = PromptTemplate.__dataclass_fields__
    missing = [f for f in ("header", "shot_block_format", "query_block_format", "no_answer_sentinel") if f not in data]
    if missing:
        raise DataError(f"template missing keys: {missing}")
    return PromptTemplate(**{k: v for k, v in data.items() if k in fields})


@dataclass(frozen=True)
class FewShotSet:
    multi: QPARecord
    single: QPARecord
    zero: QPARecord
    seed: int

    def __iter__(self):
        return iter((self.multi, self.single, self.zero))

    @property
    def pq_ids(self) -> list[str]:
        return [r.pq_id for r in self]


def select_shots(
    train: Sequence[QPARecord], seed: int = DEFAULT_SEED, exclude: Iterable[str] = ()
) -> FewShotSet:
    """Pick one multi-, one single- and one zero-answer training record.

    Each category pool keeps corpus order and is sampled with its own
    ``random.Random(seed)`` draw, so the choice depends only on the train list
    and the seed.
    """
    skip = set(exclude)
    pools: dict[str, list[QPARecord]] = {"multi": [], "single": [], "zero": []}
    for rec in train:
        if rec.split == "train" and rec.pq_id not in skip:
            pools[rec.category].append(rec)
    for cat, pool in pools.items():
        if not pool:
            raise DataError(f"no {cat}-answer record available in the train split")
    rng = random.Random(seed)
    chosen = {cat: rng.choice(pools[cat]) for cat in ("multi", "single", "zero")}
    return FewShotSet(seed=seed, **chosen)


def quote(text: str) -> str:
    return f'"{text}"'


def render_answers(template: PromptTemplate, record: QPARecord) -> str:
    if not record.answers:
        return template.no_answer_sentinel
    return "\n".join(quote(a.text) for a in record.answers)


def render_shot(template: PromptTemplate, record: QPARecord) -> str:
    tafsir_block = template.tafsir_format.format(tafsir=record.tafsir) if record.tafsir else ""
    return template.shot_block_format.format(
        passage=record.passage,
        tafsir_block=tafsir_block,
        question=record.question,
        answers=render_answers(template, record),
    )


def build_prompt(
    template: PromptTemplate,
    shots: FewShotSet | Sequence[QPARecord],
    passage: str,
    question: str,
) -> str:
    if not passage or not question:
        raise ValueError("passage and question must be non-empty")
    return render_prompt(template, shots, passage, question)


def render_prompt(
    template: PromptTemplate,
    shots: FewShotSet | Sequence[QPARecord],
    passage: str,
    question: str,
) -> str:
    shot_text = "".join(render_shot(template, r) for r in shots)
    query = template.query_block_format.format(passage=passage, question=question)
    return template.header + shot_text + query
