"""Command-line entry point: prepare, predict, postprocess, evaluate.

Exit codes: 0 success, 1 usage, 2 data validation, 3 provider/network.
Diagnostics go to stderr; stdout only carries the requested output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .align import DEFAULT_MIN_FUZZY_F1, load_nbest
from .config import read_toml
from .corpus import SPLITS, load_corpus, merge_corpora, reformat_external, split_stats, write_corpus
from .errors import DataError, OfflineCacheMiss, ProviderError
from .evaluation import MATCHING, EvalReport, evaluate_run, render_comparison, render_report
from .pipeline import (
    RunManifest,
    file_digest,
    manifest_path,
    postprocess,
    predict,
    read_manifest,
)
from .postproc import load_postproc_config
from .prompting import DEFAULT_SEED, LLMClient, load_provider_config, load_template, select_shots
from .runfile import load_run, write_run

log = logging.getLogger("quranqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key or not value:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return key, value


def _add_postproc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with [postproc]/[align]/[provider] tables")
    p.add_argument("--k", type=int, default=None, help="answers kept per question (default 10)")
    p.add_argument("--nms-threshold", type=float, default=None)
    p.add_argument("--qsim-threshold", type=float, default=None)
    p.add_argument("--stopword-threshold", type=float, default=None)
    p.add_argument("--stopwords", default=None, help="stopword file (one normalized word per line)")


def _postproc_cfg(args):
    return load_postproc_config(
        args.config,
        k=args.k,
        nms_overlap_threshold=args.nms_threshold,
        question_sim_threshold=args.qsim_threshold,
        stopword_ratio_threshold=args.stopword_threshold,
        stoplist=args.stopwords,
    )


def _min_fuzzy(args) -> float:
    if args.min_fuzzy_f1 is not None:
        return args.min_fuzzy_f1
    if args.config:
        return float(read_toml(args.config).get("align", {}).get("min_fuzzy_f1", DEFAULT_MIN_FUZZY_F1))
    return DEFAULT_MIN_FUZZY_F1


def _select(records, split):
    return [r for r in records if split is None or r.split == split]


def cmd_prepare(args) -> int:
    if not args.jsonl and not args.squad:
        raise UsageError("prepare needs at least one --jsonl or --squad input")
    corpora = []
    for split, path in args.jsonl:
        if split not in SPLITS:
            raise UsageError(f"--jsonl split must be one of {SPLITS}, got {split!r}")
        corpora.append(load_corpus(path, split=split, source=args.source))
    for source, path in args.squad:
        records, dropped = reformat_external(path, "squad_style", source=source, split=args.squad_split)
        if dropped:
            log.warning("%s: dropped %d records with unverifiable answer offsets", path, dropped)
        corpora.append(records)
    merged = merge_corpora(corpora)
    write_corpus(merged, args.out)
    stats = split_stats(merged)
    if args.format == "json":
        print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    else:
        print(stats.render_table())
    log.info("wrote %d records to %s", len(merged), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    records = load_corpus(args.corpus)
    queries = _select(records, args.split)
    if args.limit:
        queries = queries[: args.limit]
    cfg = _postproc_cfg(args)
    template = load_template(args.template)
    provider = load_provider_config(
        args.config,
        provider=args.provider,
        model=args.model,
        endpoint=args.endpoint,
        max_concurrency=args.concurrency,
    )
    shots = select_shots(records, args.seed)
    client = LLMClient(
        provider, args.cache_dir, offline=args.offline, template_digest=template.digest
    )
    min_f1 = _min_fuzzy(args)
    result = predict(queries, shots, template, client, cfg, min_f1, workers=args.workers)
    if result.missing:
        print(
            f"offline cache miss for {len(result.missing)} question(s): " + ", ".join(result.missing),
            file=sys.stderr,
        )
        return EXIT_PROVIDER
    write_run(result.run, args.out)
    RunManifest(
        command="predict",
        corpus_digest=file_digest(args.corpus),
        split=args.split,
        k=cfg.k,
        postproc=cfg.to_dict(),
        template_digest=template.digest,
        shot_pq_ids=shots.pq_ids,
        provider=provider.describe(),
        seed=args.seed,
        min_fuzzy_f1=min_f1,
        counters=result.counters,
        client=client.stats.summary(),
    ).write(manifest_path(args.out))
    log.info("wrote run for %d questions to %s", len(result.run), args.out)
    return EXIT_OK


def cmd_postprocess(args) -> int:
    records = _select(load_corpus(args.corpus), args.split)
    cfg = _postproc_cfg(args)
    nbest = load_nbest(args.nbest, records, args.top_n)
    result = postprocess(nbest, records, cfg)
    write_run(result.run, args.out)
    RunManifest(
        command="postprocess",
        corpus_digest=file_digest(args.corpus),
        split=args.split,
        k=cfg.k,
        postproc=cfg.to_dict(),
        nbest_digest=file_digest(args.nbest),
        counters={**result.counters, "top_n": args.top_n},
    ).write(manifest_path(args.out))
    return EXIT_OK


def _score(run_path, records, args) -> EvalReport:
    manifest = read_manifest(run_path) or {}
    report = evaluate_run(
        load_run(run_path),
        records,
        args.k,
        split=args.split,
        exclude=manifest.get("shot_pq_ids", []),
        matching=args.matching,
    )
    report.system = args.system or Path(run_path).stem
    if args.system_type:
        report.system_type = args.system_type
    elif manifest.get("command") == "predict":
        report.system_type = "Few-shot LLM"
    elif manifest.get("command") == "postprocess":
        report.system_type = "Fine-tuned"
    report.drop_counts = manifest.get("counters", {}).get("alignment", {})
    return report


def cmd_evaluate(args) -> int:
    records = load_corpus(args.corpus)
    report = _score(args.run, records, args)
    baseline = _score(args.baseline, records, args) if args.baseline else None
    if args.format == "json" and baseline is not None:
        text = json.dumps(
            {
                "report": report.to_dict(),
                "baseline": baseline.to_dict(),
                "delta": {"macro_pap": report.macro_pap - baseline.macro_pap},
            },
            ensure_ascii=False,
            sort_keys=True,
            indent=2,
        ) + "\n"
    else:
        text = render_report(report, args.format)
        if baseline is not None:
            text += "\n" + render_comparison(report, baseline)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quranqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("prepare", help="reformat and merge corpora into unified JSONL")
    p.add_argument("--jsonl", type=_key_value, action="append", default=[], metavar="SPLIT=PATH",
                   help="unified or native QRCD JSONL file for a split")
    p.add_argument("--squad", type=_key_value, action="append", default=[], metavar="SOURCE=PATH",
                   help="SQuAD-style JSON file tagged with a source (e.g. quqa, arcd)")
    p.add_argument("--squad-split", default="train", choices=SPLITS)
    p.add_argument("--source", default=None, help="source tag for --jsonl records lacking one")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("predict", help="few-shot prompt a provider and write a run file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="test", choices=SPLITS)
    p.add_argument("--provider", default=None, help="gemini, deepseek or openai")
    p.add_argument("--model", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--template", default=None, help="TOML prompt template (default: bundled Arabic)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--offline", action="store_true", help="never call the network; cache misses fail")
    p.add_argument("--cache-dir", default=".llm_cache")
    p.add_argument("--min-fuzzy-f1", type=float, default=None)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--concurrency", type=int, default=None, help="max in-flight provider requests")
    p.add_argument("--limit", type=int, default=None, help="only the first N questions")
    p.add_argument("--out", required=True)
    _add_postproc_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("postprocess", help="post-process an n-best file into a run file")
    p.add_argument("--nbest", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default=None, choices=SPLITS)
    p.add_argument("--top-n", type=int, default=10, help="n-best candidates read per question")
    p.add_argument("--out", required=True)
    _add_postproc_flags(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="score a run file with pAP@k")
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default=None, choices=SPLITS)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--baseline", default=None, help="second run file to compare against")
    p.add_argument("--matching", choices=MATCHING, default="greedy")
    p.add_argument("--system", default=None, help="system name shown in the table")
    p.add_argument("--system-type", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"quranqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"quranqa {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"quranqa {args.command}: invalid setting: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OfflineCacheMiss, ProviderError) as exc:
        print(f"quranqa {args.command}: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
