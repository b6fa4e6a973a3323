"""Whole-answer verification.

For each question: generate an answer, gate it ("does it directly answer
the question?"), retrieve candidate evidence with the combined
question-plus-answer query, gate the evidence the same way, then classify
whether the evidence supports the answer. Any failed gate or empty
retrieval short-circuits to NotRelated; human-judged (qrel) evidence skips
its gate by assumption.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from . import prompts
from .corpus import Question
from .llm import (
    NO,
    UNPARSEABLE,
    YES,
    LlmClient,
    LlmExchange,
    UnparseableResponse,
    Verdict,
    is_no_answer,
    parse_yes_no,
)
from .runlog import VERIFY_SCHEMA, RunLogWriter, completed_qids, read_records

NOT_RELATED = "NotRelated"
ERROR = "Error"


class EvidenceMode(Enum):
    BM25_TOP1 = "bm25"
    NEURAL_TOP1 = "neural"
    READER_TOP3 = "reader"
    QREL = "qrel"

    @classmethod
    def from_name(cls, name: str) -> "EvidenceMode":
        for mode in cls:
            if mode.value == name:
                return mode
        raise ValueError(f"unknown evidence mode {name!r}")


@dataclass
class VerificationRecord:
    qid: int
    question: str
    generated_answer: str = ""
    combined_query: str = ""
    evidence_mode: str = ""
    evidence_text: str = ""
    evidence_pids: list[int] = field(default_factory=list)
    gate_generated: Verdict | None = None
    gate_evidence: Verdict | None = None
    verdict: str = ""
    flags: list[str] = field(default_factory=list)
    error: str | None = None
    exchanges: list[LlmExchange] = field(default_factory=list)

    def llm_calls(self) -> int:
        return len(self.exchanges)

    def as_dict(self) -> dict:
        record = {
            "schema": VERIFY_SCHEMA,
            "qid": self.qid,
            "question": self.question,
            "generated_answer": self.generated_answer,
            "combined_query": self.combined_query,
            "evidence_mode": self.evidence_mode,
            "evidence_text": self.evidence_text,
            "evidence_pids": self.evidence_pids,
            "gate_generated": self.gate_generated.as_dict() if self.gate_generated else None,
            "gate_evidence": self.gate_evidence.as_dict() if self.gate_evidence else None,
            "verdict": self.verdict,
            "flags": self.flags,
            "error": self.error,
            "exchanges": [e.as_dict() for e in self.exchanges],
        }
        record["content_sha256"] = record_content_hash(record)
        record["ts"] = datetime.now(timezone.utc).isoformat()
        return record


_HASH_EXCLUDE = ("exchanges", "ts", "content_sha256")


def record_content_hash(record: dict) -> str:
    stable = {k: v for k, v in record.items() if k not in _HASH_EXCLUDE}
    blob = json.dumps(stable, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def build_combined_query(question: str, answer: str) -> str:
    """Plain single-space concatenation; nothing is deduplicated or cut."""
    if not question or not answer:
        raise ValueError("question and answer must both be non-empty")
    return f"{question} {answer}"


def truncate_evidence(template: str, bindings: dict, evidence_key: str, budget: int):
    """Tail-cut the evidence binding so the rendered prompt fits `budget`
    characters. Returns (bindings, truncated_flag)."""
    rendered = prompts.render(template, bindings)
    if budget <= 0 or len(rendered) <= budget:
        return bindings, False
    overshoot = len(rendered) - budget
    evidence = bindings[evidence_key]
    cut = max(0, len(evidence) - overshoot)
    trimmed = dict(bindings)
    trimmed[evidence_key] = evidence[:cut]
    return trimmed, True


@dataclass
class AnswerPipeline:
    """Experiment driver for one evidence mode."""

    client: LlmClient
    retriever: object | None
    mode: EvidenceMode
    qrels: object | None = None
    corpus: object | None = None
    max_prompt_chars: int = 0

    def __post_init__(self):
        self._gate_cache: dict[tuple[int, str], Verdict] = {}
        self._cache_lock = threading.Lock()

    # -- individual steps ---------------------------------------------------

    def generate_answer(self, question: str, record: VerificationRecord) -> str:
        if not question.strip():
            raise ValueError("empty question")
        exchange = self.client.complete("Answer", prompts.render("Answer", {"query": question}))
        record.exchanges.append(exchange)
        return exchange.raw_response

    def check_direct(self, question: str, answer: str, record: VerificationRecord) -> Verdict:
        prompt = prompts.render("DirectCheck", {"query": question, "answer": answer})
        exchange = self.client.complete("DirectCheck", prompt)
        record.exchanges.append(exchange)
        try:
            return parse_yes_no(exchange.raw_response)
        except UnparseableResponse as exc:
            return Verdict(UNPARSEABLE, exc.raw)

    def _gate_generated(self, qid: int, question: str, answer: str, record) -> Verdict:
        key = (qid, answer)
        with self._cache_lock:
            cached = self._gate_cache.get(key)
        if cached is not None:
            return cached
        verdict = self.check_direct(question, answer, record)
        with self._cache_lock:
            self._gate_cache[key] = verdict
        return verdict

    def reader_extract(self, question: str, passages: list[str], record) -> str | None:
        """Question-focused summary of exactly three passages, or None when
        the reply declines. Shorter inputs are padded by repeating the last
        passage."""
        if not passages:
            raise ValueError("reader needs at least one passage")
        padded = list(passages[:3])
        while len(padded) < 3:
            padded.append(padded[-1])
        prompt = prompts.render("Reader", {
            "query": question,
            "passage1": padded[0],
            "passage2": padded[1],
            "passage3": padded[2],
        })
        exchange = self.client.complete("Reader", prompt)
        record.exchanges.append(exchange)
        if is_no_answer(exchange.raw_response):
            return None
        return exchange.raw_response

    def retrieve_evidence(self, combined_query, question, qid, record) -> tuple[str, list[int]]:
        """Evidence text and supporting pids for one record; empty text
        models a retrieval miss."""
        mode = self.mode
        if mode is EvidenceMode.QREL:
            pids = self.qrels.relevant(qid) if self.qrels is not None else []
            if not pids:
                return "", []
            pid = pids[0]
            return self.corpus.text(pid), [pid]
        if mode is EvidenceMode.READER_TOP3:
            hits = self.retriever.top(combined_query, 3)
            if not hits:
                return "", []
            summary = self.reader_extract(question, [text for _, text in hits], record)
            if summary is None:
                return "", [pid for pid, _ in hits]
            return summary, [pid for pid, _ in hits]
        hits = self.retriever.top(combined_query, 1)
        if not hits:
            return "", []
        pid, text = hits[0]
        return text, [pid]

    def classify_support(self, question, generated, evidence, record) -> Verdict:
        bindings = {"query": question, "LLM answer": generated, "Retrieved answer": evidence}
        bindings, truncated = truncate_evidence(
            "SupportCheck", bindings, "Retrieved answer", self.max_prompt_chars
        )
        if truncated and "truncated" not in record.flags:
            record.flags.append("truncated")
        prompt = prompts.render("SupportCheck", bindings)
        exchange = self.client.complete("SupportCheck", prompt)
        record.exchanges.append(exchange)
        try:
            return parse_yes_no(exchange.raw_response)
        except UnparseableResponse as exc:
            return Verdict(UNPARSEABLE, exc.raw)

    # -- per-question flow ----------------------------------------------------

    def run_question(self, question: Question) -> VerificationRecord:
        record = VerificationRecord(qid=question.qid, question=question.text,
                                    evidence_mode=self.mode.value)
        record.generated_answer = self.generate_answer(question.text, record)
        if not record.generated_answer.strip():
            # nothing came back; there is no answer to gate or verify
            record.flags.append("empty_answer")
            record.verdict = NOT_RELATED
            return record
        record.combined_query = build_combined_query(question.text, record.generated_answer)

        record.gate_generated = self._gate_generated(
            question.qid, question.text, record.generated_answer, record
        )
        if record.gate_generated.label == UNPARSEABLE:
            record.verdict = UNPARSEABLE
            return record
        if record.gate_generated.label == NO:
            record.verdict = NOT_RELATED
            return record

        record.evidence_text, record.evidence_pids = self.retrieve_evidence(
            record.combined_query, question.text, question.qid, record
        )
        if not record.evidence_text:
            record.flags.append("no_evidence")
            record.verdict = NOT_RELATED
            return record

        if self.mode is EvidenceMode.QREL:
            record.gate_evidence = None  # assumed to address the question
        else:
            bindings = {"query": question.text, "answer": record.evidence_text}
            bindings, truncated = truncate_evidence(
                "DirectCheck", bindings, "answer", self.max_prompt_chars
            )
            if truncated:
                record.flags.append("truncated")
            prompt = prompts.render("DirectCheck", bindings)
            exchange = self.client.complete("DirectCheck", prompt)
            record.exchanges.append(exchange)
            try:
                record.gate_evidence = parse_yes_no(exchange.raw_response)
            except UnparseableResponse as exc:
                record.gate_evidence = Verdict(UNPARSEABLE, exc.raw)
            if record.gate_evidence.label == UNPARSEABLE:
                record.verdict = UNPARSEABLE
                return record
            if record.gate_evidence.label == NO:
                record.verdict = NOT_RELATED
                return record

        support = self.classify_support(
            question.text, record.generated_answer, record.evidence_text, record
        )
        record.verdict = support.label if support.label in (YES, NO) else UNPARSEABLE
        return record


def run_experiment(
    pipeline: AnswerPipeline,
    questions: list[Question],
    log_path,
    concurrency: int = 1,
) -> list[dict]:
    """Process every question not yet in the log; append records in input
    order; isolate per-question failures into their records."""
    existing = read_records(log_path)
    done = completed_qids(existing, "verify", pipeline.mode.value)
    pending = [q for q in questions if q.qid not in done]
    written: list[dict] = []

    def work(question: Question) -> dict:
        try:
            record = pipeline.run_question(question)
        except Exception as exc:  # per-question isolation
            record = VerificationRecord(
                qid=question.qid, question=question.text,
                evidence_mode=pipeline.mode.value,
                verdict=ERROR, error=f"{type(exc).__name__}: {exc}",
            )
        return record.as_dict()

    with RunLogWriter(log_path) as log:
        if concurrency <= 1:
            for question in pending:
                row = work(question)
                log.append(row)
                written.append(row)
        else:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                futures = [pool.submit(work, q) for q in pending]
                for future in futures:  # input order keeps the log deterministic
                    row = future.result()
                    log.append(row)
                    written.append(row)
    return written
