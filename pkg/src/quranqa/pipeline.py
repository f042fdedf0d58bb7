"""End-to-end prediction and n-best post-processing, plus run manifests."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .align import DEFAULT_MIN_FUZZY_F1, AlignCounter, CandidateSpan, align_llm_answers
from .corpus import QPARecord
from .errors import OfflineCacheMiss
from .postproc import PostprocConfig, PostprocStats, run_pipeline
from .prompting import FewShotSet, LLMClient, PromptTemplate, build_prompt
from .prompting import parse_response, response_status
from .runfile import Run, entries_from_spans
from .text import tokenize

log = logging.getLogger(__name__)


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(run_path: str | Path) -> Path:
    return Path(run_path).with_suffix(".manifest.json")


@dataclass
class RunManifest:
    command: str
    corpus_digest: str
    split: str | None
    k: int
    postproc: dict
    tool_version: str = __version__
    template_digest: str | None = None
    shot_pq_ids: list[str] = field(default_factory=list)
    provider: dict | None = None
    seed: int | None = None
    min_fuzzy_f1: float | None = None
    nbest_digest: str | None = None
    counters: dict = field(default_factory=dict)
    client: dict = field(default_factory=dict)

    def dumps(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")


def read_manifest(run_path: str | Path) -> dict | None:
    path = manifest_path(run_path)
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class QuestionResult:
    pq_id: str
    spans: list[CandidateSpan] = field(default_factory=list)
    status: str = "answers"
    align: AlignCounter = field(default_factory=AlignCounter)
    post: PostprocStats = field(default_factory=PostprocStats)
    missing: bool = False


@dataclass
class PredictResult:
    run: Run
    counters: dict
    missing: list[str]


def _predict_one(
    rec: QPARecord,
    shots: FewShotSet,
    template: PromptTemplate,
    client: LLMClient,
    cfg: PostprocConfig,
    min_fuzzy_f1: float,
) -> QuestionResult:
    result = QuestionResult(rec.pq_id)
    prompt = build_prompt(template, shots, rec.passage, rec.question)
    try:
        response = client.query(prompt)
    except OfflineCacheMiss:
        result.missing = True
        return result
    answers = parse_response(response.text, template.no_answer_sentinel)
    result.status = response_status(response.text, template.no_answer_sentinel)
    tokens = tokenize(rec.passage)
    spans = align_llm_answers(answers, rec, tokens, min_fuzzy_f1, result.align)
    result.spans = run_pipeline(spans, rec.question, cfg, result.post, pq_id=rec.pq_id).spans
    return result


def _collect(results: Sequence[QuestionResult]) -> PredictResult:
    align, post = AlignCounter(), PostprocStats()
    status = {"answers": 0, "no_answer": 0, "unparseable": 0}
    run: Run = {}
    missing = []
    for res in results:
        if res.missing:
            missing.append(res.pq_id)
            continue
        status[res.status] += 1
        align.add(res.align)
        post.add(res.post)
        run[res.pq_id] = entries_from_spans(res.spans)
    counters = {
        "questions": len(run),
        "responses": status,
        "alignment": {**asdict(align), "drop_rate": round(align.drop_rate, 6)},
        "postproc": asdict(post),
    }
    return PredictResult(dict(sorted(run.items())), counters, sorted(missing))


def predict(
    records: Sequence[QPARecord],
    shots: FewShotSet,
    template: PromptTemplate,
    client: LLMClient,
    cfg: PostprocConfig,
    min_fuzzy_f1: float = DEFAULT_MIN_FUZZY_F1,
    workers: int = 1,
) -> PredictResult:
    """Prompt, parse, align and post-process every record.

    Shot records are skipped. Output order is pq_id order whatever the
    completion order of the workers.
    """
    skip = set(shots.pq_ids)
    todo = [r for r in records if r.pq_id not in skip]

    def one(rec: QPARecord) -> QuestionResult:
        return _predict_one(rec, shots, template, client, cfg, min_fuzzy_f1)

    if workers <= 1:
        results = [one(r) for r in todo]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, todo))
    return _collect(results)


def postprocess(
    nbest: Mapping[str, Sequence[CandidateSpan]],
    records: Sequence[QPARecord],
    cfg: PostprocConfig,
) -> PredictResult:
    by_id = {r.pq_id: r for r in records}
    results = []
    for pq_id in sorted(nbest):
        res = QuestionResult(pq_id)
        res.spans = run_pipeline(nbest[pq_id], by_id[pq_id].question, cfg, res.post, pq_id=pq_id).spans
        results.append(res)
    out = _collect(results)
    del out.counters["responses"], out.counters["alignment"]
    return out
