"""Command-line entry point.

Subcommands: index, verify, facts, report, sample, label, serve-mock.
Every subcommand prints a one-line JSON summary as its last stdout line.
Credentials come only from the environment (see `api_key_env`), never from
flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .answer_pipeline import AnswerPipeline, EvidenceMode
from .answer_pipeline import run_experiment as run_verify
from .bm25 import Bm25Params, load_or_build
from .config import RunConfig, apply_config_file
from .corpus import TokenizerConfig, load_collection, load_qrels, load_queries
from .facts_pipeline import FactsPipeline
from .facts_pipeline import run_experiment as run_facts
from .llm import HttpBackend, LlmClient, LlmSettings, MockBackend
from .reporting import (
    CellKey,
    label_session,
    load_labels,
    agreement_report,
    render_text,
    render_tsv,
    sample_cell,
    tabulate,
)
from .retrieval import Bm25Retriever, NeuralRetriever
from .runlog import read_records

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _summary(payload: dict) -> None:
    print(json.dumps(payload, ensure_ascii=False))


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise CliError(f"no {what} configured", EXIT_USAGE)
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}", EXIT_USAGE)
    return p


def _load_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        apply_config_file(config, _require_file(args.config, "config file"))
    for key in vars(config):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "no_stem", False):
        config.stemming = False
    if getattr(args, "stopwords_flag", False):
        config.stopwords = True
    return config


def _tokenizer(config: RunConfig) -> TokenizerConfig:
    return TokenizerConfig(stemming=config.stemming, stopwords=config.stopwords)


def _make_client(config: RunConfig, mock_path: str | None) -> LlmClient:
    if mock_path:
        backend = MockBackend.from_jsonl(_require_file(mock_path, "fixtures file"))
    else:
        backend = HttpBackend(LlmSettings(
            base_url=config.base_url,
            model=config.model,
            api_key_env=config.api_key_env,
            retry_limit=config.retry_limit,
        ))
    return LlmClient(backend, rate_limit_per_min=config.rate_limit_per_min)


def _make_retriever(config: RunConfig, kind: str):
    if kind == "neural":
        if not config.neural_url:
            raise CliError("neural retrieval requires neural_url", EXIT_USAGE)
        retriever = NeuralRetriever(config.neural_url)
        retriever.check_health()
        return retriever
    corpus = load_collection(_require_file(config.collection, "collection"), _tokenizer(config))
    cache = config.index_cache or (config.collection + ".idx")
    index, _, _ = load_or_build(cache, corpus, Bm25Params(config.k1, config.b))
    return Bm25Retriever(index, corpus)


# -- subcommands ---------------------------------------------------------------


def cmd_index(args) -> int:
    config = _load_config(args)
    collection = _require_file(config.collection, "collection")
    cache = config.index_cache or (config.collection + ".idx")
    corpus = load_collection(collection, _tokenizer(config))
    index, built, seconds = load_or_build(cache, corpus, Bm25Params(config.k1, config.b))
    print(f"doc_count={index.doc_count} avg_doc_len={index.avg_doc_len:.4f} "
          f"build_time={seconds:.2f}s {'(rebuilt)' if built else '(cache reused)'}")
    _summary({
        "command": "index", "cache": str(cache), "doc_count": index.doc_count,
        "avg_doc_len": index.avg_doc_len, "rebuilt": built,
        "build_seconds": round(seconds, 3),
    })
    return EXIT_OK


def _plan_verify(mode: EvidenceMode, n: int) -> dict:
    per_question = {
        EvidenceMode.BM25_TOP1: (2, 4),
        EvidenceMode.NEURAL_TOP1: (2, 4),
        EvidenceMode.READER_TOP3: (2, 5),
        EvidenceMode.QREL: (2, 3),
    }[mode]
    return {"questions": n, "llm_calls_min": per_question[0] * n,
            "llm_calls_max": per_question[1] * n}


def cmd_verify(args) -> int:
    config = _load_config(args)
    questions = load_queries(_require_file(config.queries, "queries file"))
    if args.limit:
        questions = questions[: args.limit]
    mode = EvidenceMode.from_name(config.evidence_mode)

    if args.dry_run:
        plan = _plan_verify(mode, len(questions))
        _summary({"command": "verify", "dry_run": True, "mode": mode.value, **plan})
        return EXIT_OK

    qrels = None
    corpus = None
    retriever = None
    if mode is EvidenceMode.QREL:
        qrels = load_qrels(_require_file(config.qrels, "qrels file"))
        corpus = load_collection(_require_file(config.collection, "collection"), _tokenizer(config))
    else:
        retriever = _make_retriever(config, "neural" if mode in (
            EvidenceMode.NEURAL_TOP1, EvidenceMode.READER_TOP3) else "bm25")

    client = _make_client(config, args.mock)
    pipeline = AnswerPipeline(
        client=client, retriever=retriever, mode=mode, qrels=qrels,
        corpus=corpus, max_prompt_chars=config.max_prompt_chars,
    )
    log_path = config.run_log or "verify.jsonl"
    written = run_verify(pipeline, questions, log_path, concurrency=config.concurrency)
    verdicts: dict[str, int] = {}
    for row in written:
        verdicts[row["verdict"]] = verdicts.get(row["verdict"], 0) + 1
    _summary({
        "command": "verify", "mode": mode.value, "run_log": str(log_path),
        "written": len(written), "llm_calls": client.calls, "verdicts": verdicts,
    })
    return EXIT_OK


def cmd_facts(args) -> int:
    config = _load_config(args)
    questions = load_queries(_require_file(config.queries, "queries file"))
    if args.limit:
        questions = questions[: args.limit]

    if args.dry_run:
        _summary({
            "command": "facts", "dry_run": True, "questions": len(questions),
            "llm_calls_min": 2 * len(questions),
            "llm_calls_note": "2 + statements x (1 validate, +1 post-edit per contradiction) per question",
        })
        return EXIT_OK

    retriever = _make_retriever(config, config.retriever)
    client = _make_client(config, args.mock)
    pipeline = FactsPipeline(client=client, retriever=retriever,
                             max_prompt_chars=config.max_prompt_chars)
    log_path = config.run_log or "facts.jsonl"
    written = run_facts(pipeline, questions, log_path)
    fact_rows = sum(1 for r in written if r["schema"] == "fact@1")
    _summary({
        "command": "facts", "retriever": config.retriever, "run_log": str(log_path),
        "written": len(written), "fact_records": fact_rows, "llm_calls": client.calls,
    })
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_records(_require_file(args.run, "run log"))
    if not records:
        raise CliError(f"run log {args.run} holds no records")
    report = tabulate(records)
    text = render_text(report)
    print(text, end="")
    outputs = {}
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text, encoding="utf-8")
        (out_dir / "report.json").write_text(
            json.dumps(report.as_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        (out_dir / "report.tsv").write_text(render_tsv(report), encoding="utf-8")
        from .figures import render_figures

        figure_paths = render_figures(report, out_dir)
        outputs = {
            "text": str(out_dir / "report.txt"),
            "json": str(out_dir / "report.json"),
            "tsv": str(out_dir / "report.tsv"),
            "figures": [str(p) for p in figure_paths],
        }
    _summary({
        "command": "report", "kind": report.kind,
        "total_records": report.total_records, "outputs": outputs,
    })
    return EXIT_OK


def cmd_sample(args) -> int:
    records = read_records(_require_file(args.run, "run log"))
    cell = CellKey.parse(args.cell)
    refs = sample_cell(records, cell, args.n, args.seed, allow_fewer=args.allow_fewer)
    out_path = Path(args.out)
    with open(out_path, "w", encoding="utf-8") as fh:
        for ref in refs:
            fh.write(json.dumps(ref, ensure_ascii=False) + "\n")
    _summary({
        "command": "sample", "cell": str(cell), "n": len(refs),
        "seed": args.seed, "out": str(out_path),
    })
    return EXIT_OK


def cmd_label(args) -> int:
    samples = []
    with open(_require_file(args.samples, "samples file"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(json.loads(line))
    session = label_session(samples, args.labels)
    report = agreement_report(load_labels(args.labels))
    _summary({
        "command": "label", "labeled_now": len(session),
        "labels_file": str(args.labels), "cells": report,
    })
    return EXIT_OK


def cmd_serve_mock(args) -> int:
    from .mock_server import make_server

    server = make_server(_require_file(args.fixtures, "fixtures file"),
                         port=args.port, default=args.default)
    port = server.server_address[1]
    _summary({"command": "serve-mock", "port": port,
              "base_url": f"http://127.0.0.1:{port}/v1"})
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# -- argument wiring -------------------------------------------------------------


def _add_config_args(parser: argparse.ArgumentParser, *, paths=True) -> None:
    parser.add_argument("--config", help="key = value config file")
    if paths:
        parser.add_argument("--collection")
        parser.add_argument("--queries")
        parser.add_argument("--qrels")
        parser.add_argument("--index-cache", dest="index_cache")
        parser.add_argument("--run-log", dest="run_log")
    parser.add_argument("--k1", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--no-stem", dest="no_stem", action="store_true",
                        help="disable stemming in the tokenizer")
    parser.add_argument("--stopwords", dest="stopwords_flag", action="store_true",
                        help="enable stopword removal")
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evicheck",
                                     description="Verify generated answers against a passage corpus.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build or refresh the BM25 index cache")
    _add_config_args(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("verify", help="run whole-answer verification")
    _add_config_args(p)
    p.add_argument("--mode", dest="evidence_mode",
                   choices=["bm25", "neural", "reader", "qrel"])
    p.add_argument("--mock", help="mock fixtures JSONL instead of a live endpoint")
    p.add_argument("--limit", type=int, help="process only the first N questions")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--neural-url", dest="neural_url")
    p.add_argument("--concurrency", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("facts", help="run statement-level verification")
    _add_config_args(p)
    p.add_argument("--retriever", choices=["bm25", "neural"])
    p.add_argument("--mock")
    p.add_argument("--limit", type=int)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--neural-url", dest="neural_url")
    p.set_defaults(func=cmd_facts)

    p = sub.add_parser("report", help="tabulate a run log")
    p.add_argument("--run", required=True)
    p.add_argument("--out-dir", help="also write txt/json/tsv and figures here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sample", help="draw an audit sample from one report cell")
    p.add_argument("--run", required=True)
    p.add_argument("--cell", required=True, help="<table>:<column>:<row>, e.g. fact:neural:Contradictory")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="samples.jsonl")
    p.add_argument("--allow-fewer", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("label", help="interactively label a drawn sample")
    p.add_argument("--samples", required=True)
    p.add_argument("--labels", default="audit_labels.jsonl")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("serve-mock", help="serve fixtures over the chat protocol")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--default", help="fallback response for unknown prompts")
    p.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _summary({"command": args.command, "error": str(exc)})
        return exc.code
    except Exception as exc:  # surfaced, never swallowed silently
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        _summary({"command": args.command, "error": f"{type(exc).__name__}: {exc}"})
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
