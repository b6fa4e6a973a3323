"""Statement-level verification and repair.

The generated answer is decomposed into factual statements; each statement
is validated against its own top retrieved passage and, when contradicted,
minimally rewritten from that passage. The surviving statements are then
reassembled into an answer whose every claim carries a passage id.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import prompts
from .answer_pipeline import record_content_hash, truncate_evidence
from .corpus import Question
from .llm import (
    CONTRADICTORY,
    NEITHER,
    SUPPORTED,
    UNPARSEABLE,
    LlmClient,
    LlmExchange,
    UnparseableResponse,
    Verdict,
    parse_scn,
    parse_statement_list,
)
from .runlog import FACT_SCHEMA, RECOMPOSED_SCHEMA, RunLogWriter, completed_qids, read_records

_SENTENCE_END = re.compile(r"[.!?](?:\s|$)")


@dataclass
class FactRecord:
    qid: int
    sidx: int
    question: str
    statement: str
    retriever: str = ""
    combined_query: str = ""
    evidence_pid: int | None = None
    evidence_text: str = ""
    verdict: Verdict | None = None
    post_edit: str | None = None
    flags: list[str] = field(default_factory=list)
    exchanges: list[LlmExchange] = field(default_factory=list)

    def as_dict(self) -> dict:
        record = {
            "schema": FACT_SCHEMA,
            "qid": self.qid,
            "sidx": self.sidx,
            "question": self.question,
            "statement": self.statement,
            "retriever": self.retriever,
            "combined_query": self.combined_query,
            "evidence_pid": self.evidence_pid,
            "evidence_text": self.evidence_text,
            "verdict": self.verdict.as_dict() if self.verdict else None,
            "post_edit": self.post_edit,
            "flags": self.flags,
            "exchanges": [e.as_dict() for e in self.exchanges],
        }
        record["content_sha256"] = record_content_hash(record)
        record["ts"] = datetime.now(timezone.utc).isoformat()
        return record


@dataclass
class AttributedAnswer:
    qid: int
    segments: list[tuple[str, int]] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def display_text(self) -> str:
        return " ".join(text for text, _ in self.segments)

    def as_dict(self, question: str = "", generated_answer: str = "",
                exchanges: list[LlmExchange] | None = None,
                retriever: str = "") -> dict:
        record = {
            "schema": RECOMPOSED_SCHEMA,
            "qid": self.qid,
            "question": question,
            "generated_answer": generated_answer,
            "retriever": retriever,
            "segments": [{"text": t, "pid": p} for t, p in self.segments],
            "dropped": self.dropped,
            "flags": self.flags,
            "exchanges": [e.as_dict() for e in exchanges or []],
        }
        record["content_sha256"] = record_content_hash(record)
        record["ts"] = datetime.now(timezone.utc).isoformat()
        return record


def recompose(qid: int, fact_records: list[FactRecord]) -> AttributedAnswer:
    """Supported statements verbatim and post-edited contradicted ones, in
    extraction order, each tied to its passage; everything else is dropped."""
    answer = AttributedAnswer(qid=qid)
    for record in sorted(fact_records, key=lambda r: r.sidx):
        label = record.verdict.label if record.verdict else NEITHER
        if label == SUPPORTED:
            answer.segments.append((record.statement, record.evidence_pid))
        elif label == CONTRADICTORY:
            answer.segments.append((record.post_edit or record.statement, record.evidence_pid))
        else:
            answer.dropped.append(record.statement)
    if not fact_records:
        answer.flags.append("extraction_failure")
    return answer


@dataclass
class FactsPipeline:
    client: LlmClient
    retriever: object
    max_prompt_chars: int = 0

    def generate_answer(self, question: str, exchanges: list[LlmExchange]) -> str:
        if not question.strip():
            raise ValueError("empty question")
        exchange = self.client.complete("Answer", prompts.render("Answer", {"query": question}))
        exchanges.append(exchange)
        return exchange.raw_response

    def extract_facts(self, question: str, answer: str, exchanges: list[LlmExchange]) -> list[str]:
        if not answer.strip():
            raise ValueError("empty answer")
        prompt = prompts.render("FactExtract", {"question": question, "proposed answer": answer})
        exchange = self.client.complete("FactExtract", prompt)
        exchanges.append(exchange)
        return parse_statement_list(exchange.raw_response)

    def retrieve_for_statement(self, question: str, statement: str) -> tuple[int | None, str]:
        if not statement.strip():
            raise ValueError("empty statement")
        combined = f"{question} {statement}"
        hits = self.retriever.top(combined, 1)
        if not hits:
            return None, ""
        return hits[0]

    def validate_fact(self, statement: str, passage: str, record: FactRecord) -> Verdict:
        if not statement or not passage:
            raise ValueError("statement and evidence must both be non-empty")
        bindings = {"statement": statement, "passage": passage}
        bindings, truncated = truncate_evidence(
            "FactValidate", bindings, "passage", self.max_prompt_chars
        )
        if truncated:
            record.flags.append("truncated")
        exchange = self.client.complete("FactValidate", prompts.render("FactValidate", bindings))
        record.exchanges.append(exchange)
        try:
            return parse_scn(exchange.raw_response)
        except UnparseableResponse as exc:
            return Verdict(UNPARSEABLE, exc.raw)

    def post_edit(self, statement: str, passage: str, record: FactRecord) -> str:
        bindings = {"statement": statement, "passage": passage}
        bindings, truncated = truncate_evidence(
            "FactPostEdit", bindings, "passage", self.max_prompt_chars
        )
        if truncated:
            record.flags.append("truncated")
        exchange = self.client.complete("FactPostEdit", prompts.render("FactPostEdit", bindings))
        record.exchanges.append(exchange)
        edited = exchange.raw_response.strip()
        if len(_SENTENCE_END.findall(edited)) > 1:
            record.flags.append("length_anomaly")
        return edited

    def run_question(self, question: Question) -> tuple[list[FactRecord], AttributedAnswer, dict]:
        """All fact records plus the recomposed answer for one question.

        Returns (fact_records, attributed_answer, context) where context
        carries the generated answer and the extraction exchanges.
        """
        shared: list[LlmExchange] = []
        answer = self.generate_answer(question.text, shared)
        statements = self.extract_facts(question.text, answer, shared)

        records: list[FactRecord] = []
        retriever_name = getattr(self.retriever, "name", "bm25")
        for sidx, statement in enumerate(statements):
            record = FactRecord(qid=question.qid, sidx=sidx,
                                question=question.text, statement=statement,
                                retriever=retriever_name)
            record.combined_query = f"{question.text} {statement}"
            pid, passage = self.retrieve_for_statement(question.text, statement)
            record.evidence_pid = pid
            record.evidence_text = passage
            if not passage:
                # No evidence to judge against: no definitive conclusion.
                record.verdict = Verdict(NEITHER, "")
                record.flags.append("no_evidence")
            else:
                record.verdict = self.validate_fact(statement, passage, record)
                if record.verdict.label == CONTRADICTORY:
                    record.post_edit = self.post_edit(statement, passage, record)
            records.append(record)

        answer_out = recompose(question.qid, records)
        context = {"generated_answer": answer, "exchanges": shared}
        return records, answer_out, context


def run_experiment(
    pipeline: FactsPipeline,
    questions: list[Question],
    log_path,
) -> list[dict]:
    """Stream fact and recomposed records; a question counts as done once
    its recomposed record is in the log."""
    retriever_name = getattr(pipeline.retriever, "name", "bm25")
    existing = read_records(log_path)
    done = completed_qids(existing, "facts", retriever_name)
    pending = [q for q in questions if q.qid not in done]
    written: list[dict] = []
    with RunLogWriter(log_path) as log:
        for question in pending:
            try:
                records, answer, context = pipeline.run_question(question)
            except Exception as exc:  # per-question isolation
                row = {
                    "schema": RECOMPOSED_SCHEMA,
                    "qid": question.qid,
                    "question": question.text,
                    "generated_answer": "",
                    "retriever": retriever_name,
                    "segments": [],
                    "dropped": [],
                    "flags": ["error"],
                    "error": f"{type(exc).__name__}: {exc}",
                }
                row["content_sha256"] = record_content_hash(row)
                row["ts"] = datetime.now(timezone.utc).isoformat()
                log.append(row)
                written.append(row)
                continue
            for record in records:
                row = record.as_dict()
                log.append(row)
                written.append(row)
            row = answer.as_dict(question.text, context["generated_answer"],
                                 context["exchanges"], retriever_name)
            log.append(row)
            written.append(row)
    return written
