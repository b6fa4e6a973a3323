"""Aggregate run logs into report tables, draw audit samples, and run the
interactive labeling session.

Two report shapes exist. Answer runs produce a direct-answer gate table
(how often each answer type was judged to address the question) and a
support table (Yes / No / NotRelated verdicts, with Yes/No percentages
computed after excluding NotRelated). Fact runs produce the
statement-classification table: class counts over all statements,
per-question average fractions, and the fully-supported / none-supported /
none-contradictory question counts. Responses that could not be parsed
into a label are reported as their own row, never folded into another.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal

from .runlog import FACT_SCHEMA, RECOMPOSED_SCHEMA, VERIFY_SCHEMA

SUPPORT_ROWS = ("Yes", "No", "NotRelated", "Unparseable", "Error")
DIRECT_ROWS = ("Yes", "No", "Unparseable")
FACT_ROWS = ("Supported", "Contradictory", "Neither", "Unparseable")

TABLES = ("direct", "support", "fact")


class MixedRecordsError(ValueError):
    """One tabulate call received records from different experiments."""


def half_up_pct(count: int, total: int) -> float:
    """count/total as a percentage, two decimals, round half up."""
    if total == 0:
        return 0.0
    pct = Decimal(count) * 100 / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def half_up(value: float, places: int = 2) -> float:
    return float(Decimal(repr(value)).quantize(
        Decimal("0.01" if places == 2 else "1e-%d" % places), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CellKey:
    table: str   # direct | support | fact
    column: str  # answer type or retriever
    row: str     # verdict label

    def __str__(self) -> str:
        return f"{self.table}:{self.column}:{self.row}"

    @classmethod
    def parse(cls, text: str) -> "CellKey":
        parts = text.split(":")
        if len(parts) != 3 or parts[0] not in TABLES:
            raise ValueError(f"cell must be <table>:<column>:<row> with table in {TABLES}, got {text!r}")
        return cls(*parts)


@dataclass
class RunReport:
    kind: str  # "answer" | "facts"
    # cell -> count, covering every populated (table, column, row)
    counts: dict[CellKey, int] = field(default_factory=dict)
    # cell -> percentage under that table's denominator rule
    percentages: dict[CellKey, float] = field(default_factory=dict)
    # facts only: per-question aggregates keyed by retriever column
    fact_extras: dict[str, dict] = field(default_factory=dict)
    total_records: int = 0

    def count(self, table: str, column: str, row: str) -> int:
        return self.counts.get(CellKey(table, column, row), 0)

    def pct(self, table: str, column: str, row: str) -> float | None:
        return self.percentages.get(CellKey(table, column, row))

    def columns(self, table: str) -> list[str]:
        seen = []
        for key in self.counts:
            if key.table == table and key.column not in seen:
                seen.append(key.column)
        return seen

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "total_records": self.total_records,
            "cells": [
                {
                    "table": key.table,
                    "column": key.column,
                    "row": key.row,
                    "count": count,
                    "pct": self.percentages.get(key),
                }
                for key, count in sorted(self.counts.items(), key=lambda kv: str(kv[0]))
            ],
            "fact_extras": self.fact_extras,
        }


def _is_fact_run(schemas: set[str]) -> bool:
    return schemas <= {FACT_SCHEMA, RECOMPOSED_SCHEMA} and bool(schemas)


def tabulate(records: list[dict]) -> RunReport:
    """Fold records into a RunReport; record order never matters."""
    schemas = {r.get("schema", "") for r in records}
    if schemas == {VERIFY_SCHEMA}:
        return _tabulate_answer(records)
    if _is_fact_run(schemas):
        return _tabulate_facts(records)
    raise MixedRecordsError(f"cannot tabulate record mix {sorted(schemas)}")


def _tabulate_answer(records: list[dict]) -> RunReport:
    report = RunReport(kind="answer", total_records=len(records))
    support: dict[str, dict[str, int]] = {}
    direct: dict[str, dict[str, int]] = {}

    for record in records:
        mode = record.get("evidence_mode", "")
        verdict = record.get("verdict") or "Error"
        support.setdefault(mode, {})
        support[mode][verdict] = support[mode].get(verdict, 0) + 1

        gate_gen = record.get("gate_generated")
        if gate_gen:
            col = direct.setdefault("generated", {})
            col[gate_gen["label"]] = col.get(gate_gen["label"], 0) + 1
        gate_ev = record.get("gate_evidence")
        if gate_ev:
            col = direct.setdefault(mode, {})
            col[gate_ev["label"]] = col.get(gate_ev["label"], 0) + 1

    for mode, rows in support.items():
        yes_no = rows.get("Yes", 0) + rows.get("No", 0)
        for row, count in rows.items():
            key = CellKey("support", mode, row)
            report.counts[key] = count
            if row in ("Yes", "No"):
                report.percentages[key] = half_up_pct(count, yes_no)
    for column, rows in direct.items():
        total = sum(rows.values())
        for row, count in rows.items():
            key = CellKey("direct", column, row)
            report.counts[key] = count
            report.percentages[key] = half_up_pct(count, total)
    return report


def _tabulate_facts(records: list[dict]) -> RunReport:
    report = RunReport(kind="facts", total_records=len(records))
    facts = [r for r in records if r.get("schema") == FACT_SCHEMA]
    recomposed = [r for r in records if r.get("schema") == RECOMPOSED_SCHEMA]

    by_retriever: dict[str, list[dict]] = {}
    for record in facts:
        by_retriever.setdefault(record.get("retriever", ""), []).append(record)

    for retriever, rows in by_retriever.items():
        class_counts: dict[str, int] = {}
        by_qid: dict[int, list[str]] = {}
        for record in rows:
            verdict = record.get("verdict") or {}
            label = verdict.get("label", "Unparseable")
            class_counts[label] = class_counts.get(label, 0) + 1
            by_qid.setdefault(record["qid"], []).append(label)

        total = sum(class_counts.values())
        for row, count in class_counts.items():
            key = CellKey("fact", retriever, row)
            report.counts[key] = count
            report.percentages[key] = half_up_pct(count, total)

        questions = len(by_qid)
        fully = sum(1 for labels in by_qid.values() if all(l == "Supported" for l in labels))
        none_supported = sum(1 for labels in by_qid.values() if all(l != "Supported" for l in labels))
        none_contra = sum(1 for labels in by_qid.values() if all(l != "Contradictory" for l in labels))

        def avg_fraction(label: str) -> float:
            if not by_qid:
                return 0.0
            total_fraction = sum(
                sum(1 for l in labels if l == label) / len(labels)
                for labels in by_qid.values()
            )
            return half_up(total_fraction / questions * 100)

        report.fact_extras[retriever] = {
            "questions": questions,
            "avg_pct_supported_per_query": avg_fraction("Supported"),
            "avg_pct_contradictory_per_query": avg_fraction("Contradictory"),
            "avg_pct_neither_per_query": avg_fraction("Neither"),
            "fully_supported": fully,
            "fully_supported_pct": half_up_pct(fully, questions),
            "none_supported": none_supported,
            "none_supported_pct": half_up_pct(none_supported, questions),
            "none_contradictory": none_contra,
            "none_contradictory_pct": half_up_pct(none_contra, questions),
        }

    failures = sum(1 for r in recomposed if "extraction_failure" in r.get("flags", []))
    if recomposed:
        report.fact_extras.setdefault("_run", {})["extraction_failures"] = failures
        report.fact_extras["_run"]["questions_total"] = len(recomposed)
    return report


# -- rendering ---------------------------------------------------------------


def _fmt_cell(count: int, pct: float | None) -> str:
    if pct is None:
        return f"{count:,}"
    return f"{count:,} ({pct:.2f}%)"


def render_text(report: RunReport) -> str:
    lines: list[str] = []
    if report.kind == "answer":
        lines.append("Direct-answer gate classifications")
        for column in report.columns("direct"):
            lines.append(f"  [{column}]")
            for row in DIRECT_ROWS:
                count = report.count("direct", column, row)
                if count or row in ("Yes", "No"):
                    lines.append(f"    {row:<12} {_fmt_cell(count, report.pct('direct', column, row))}")
        lines.append("")
        lines.append("Support classifications (Yes/No percentages exclude NotRelated)")
        for column in report.columns("support"):
            lines.append(f"  [{column}]")
            for row in SUPPORT_ROWS:
                count = report.count("support", column, row)
                if count or row in ("Yes", "No", "NotRelated"):
                    lines.append(f"    {row:<12} {_fmt_cell(count, report.pct('support', column, row))}")
    else:
        lines.append("Statement-evidence classifications")
        for column in report.columns("fact"):
            extras = report.fact_extras.get(column, {})
            lines.append(f"  [{column}]")
            for row in FACT_ROWS:
                count = report.count("fact", column, row)
                if count or row in ("Supported", "Contradictory", "Neither"):
                    lines.append(f"    {row:<14} {_fmt_cell(count, report.pct('fact', column, row))}")
            if extras:
                lines.append(f"    {'Avg % supported per query':<34} {extras['avg_pct_supported_per_query']:.2f}")
                lines.append(f"    {'Avg % contradictory per query':<34} {extras['avg_pct_contradictory_per_query']:.2f}")
                lines.append(f"    {'Avg % neither per query':<34} {extras['avg_pct_neither_per_query']:.2f}")
                lines.append(f"    {'Fully supported responses':<34} "
                             f"{_fmt_cell(extras['fully_supported'], extras['fully_supported_pct'])}")
                lines.append(f"    {'None supported responses':<34} "
                             f"{_fmt_cell(extras['none_supported'], extras['none_supported_pct'])}")
                lines.append(f"    {'None contradictory responses':<34} "
                             f"{_fmt_cell(extras['none_contradictory'], extras['none_contradictory_pct'])}")
        run_info = report.fact_extras.get("_run")
        if run_info:
            lines.append(f"  questions: {run_info['questions_total']}, "
                         f"extraction failures: {run_info['extraction_failures']}")
    return "\n".join(lines) + "\n"


def render_tsv(report: RunReport) -> str:
    rows = ["table\tcolumn\trow\tcount\tpct"]
    for key, count in sorted(report.counts.items(), key=lambda kv: str(kv[0])):
        pct = report.percentages.get(key)
        rows.append(f"{key.table}\t{key.column}\t{key.row}\t{count}\t"
                    f"{'' if pct is None else f'{pct:.2f}'}")
    return "\n".join(rows) + "\n"


# -- sampling and labeling -----------------------------------------------------


def cell_population(records: list[dict], cell: CellKey) -> list[dict]:
    """Records belonging to one report cell, in log order."""
    population = []
    for record in records:
        schema = record.get("schema", "")
        if cell.table == "support" and schema == VERIFY_SCHEMA:
            if record.get("evidence_mode") == cell.column and record.get("verdict") == cell.row:
                population.append(record)
        elif cell.table == "direct" and schema == VERIFY_SCHEMA:
            if cell.column == "generated":
                gate = record.get("gate_generated")
            elif record.get("evidence_mode") == cell.column:
                gate = record.get("gate_evidence")
            else:
                gate = None
            if gate and gate.get("label") == cell.row:
                population.append(record)
        elif cell.table == "fact" and schema == FACT_SCHEMA:
            verdict = record.get("verdict") or {}
            if record.get("retriever") == cell.column and verdict.get("label") == cell.row:
                population.append(record)
    return population


class EmptyCellError(ValueError):
    pass


def sample_cell(records: list[dict], cell: CellKey, n: int, seed: int,
                allow_fewer: bool = False) -> list[dict]:
    """Uniform sample without replacement from one cell, stable for a given
    seed. Returns reference dicts that embed the sampled record."""
    population = cell_population(records, cell)
    if not population:
        raise EmptyCellError(f"cell {cell} is empty")
    if len(population) < n:
        if not allow_fewer:
            raise ValueError(f"cell {cell} holds {len(population)} records, wanted {n}")
        n = len(population)
    rng = random.Random(seed)
    chosen = rng.sample(population, n)
    refs = []
    for record in chosen:
        refs.append({
            "cell": str(cell),
            "qid": record["qid"],
            "sidx": record.get("sidx"),
            "content_sha256": record.get("content_sha256", ""),
            "record": record,
        })
    return refs


@dataclass
class AuditLabel:
    ref: dict
    opinion: str  # Correct | Incorrect
    note: str = ""
    ts: str = ""

    def as_dict(self) -> dict:
        return {
            "cell": self.ref.get("cell"),
            "qid": self.ref.get("qid"),
            "sidx": self.ref.get("sidx"),
            "content_sha256": self.ref.get("content_sha256"),
            "opinion": self.opinion,
            "note": self.note,
            "ts": self.ts or datetime.now(timezone.utc).isoformat(),
        }


def _describe(record: dict) -> list[str]:
    lines = []
    if record.get("schema") == FACT_SCHEMA:
        lines.append(f"Question:  {record.get('question', '')}")
        lines.append(f"Statement: {record.get('statement', '')}")
        lines.append(f"Evidence:  {record.get('evidence_text', '')}")
        verdict = record.get("verdict") or {}
        lines.append(f"Verdict:   {verdict.get('label')} - {verdict.get('explanation', '')}")
        if record.get("post_edit"):
            lines.append(f"Post-edit: {record['post_edit']}")
    else:
        lines.append(f"Question:  {record.get('question', '')}")
        lines.append(f"Answer:    {record.get('generated_answer', '')}")
        lines.append(f"Evidence:  {record.get('evidence_text', '')}")
        lines.append(f"Verdict:   {record.get('verdict')}")
        for gate_name in ("gate_generated", "gate_evidence"):
            gate = record.get(gate_name)
            if gate:
                lines.append(f"{gate_name}: {gate['label']} - {gate.get('explanation', '')}")
        if record.get("exchanges"):
            lines.append(f"Last reply: {record['exchanges'][-1].get('raw_response', '')}")
    return lines


def load_labels(path) -> list[dict]:
    labels = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    labels.append(json.loads(line))
    except FileNotFoundError:
        pass
    return labels


def label_session(samples: list[dict], labels_path, input_fn=None, output_fn=print) -> list[AuditLabel]:
    """Interactive per-sample labeling. Commands: c(orrect), i(ncorrect),
    s(kip), q(uit). Quitting keeps already-saved labels; labeled samples are
    not shown again on resume."""
    if input_fn is None:
        input_fn = input
    already = {row.get("content_sha256") for row in load_labels(labels_path)}
    session: list[AuditLabel] = []
    pending = [s for s in samples if s.get("content_sha256") not in already]
    output_fn(f"{len(pending)} samples to label ({len(samples) - len(pending)} already done)")
    with open(labels_path, "a", encoding="utf-8") as fh:
        for i, sample in enumerate(pending, start=1):
            output_fn(f"\n--- sample {i}/{len(pending)}  [{sample['cell']}] qid={sample['qid']} ---")
            for line in _describe(sample["record"]):
                output_fn(line)
            while True:
                try:
                    answer = input_fn("[c]orrect / [i]ncorrect / [s]kip / [q]uit > ").strip().lower()
                except EOFError:
                    answer = "q"
                if answer in ("c", "i", "s", "q"):
                    break
                output_fn("please answer c, i, s, or q")
            if answer == "q":
                break
            if answer == "s":
                continue
            label = AuditLabel(ref=sample, opinion="Correct" if answer == "c" else "Incorrect")
            fh.write(json.dumps(label.as_dict(), ensure_ascii=False) + "\n")
            fh.flush()
            session.append(label)
    all_labels = load_labels(labels_path)
    for cell, stats in agreement_report(all_labels).items():
        output_fn(f"{cell}: {stats['Correct']}/{stats['total']} Correct "
                  f"({stats['accuracy']:.2f}%)")
    return session


def agreement_report(labels: list[dict]) -> dict[str, dict]:
    """Per-cell Correct/Incorrect counts and accuracy; cells with no labels
    simply do not appear."""
    table: dict[str, dict] = {}
    for row in labels:
        cell = row.get("cell", "?")
        stats = table.setdefault(cell, {"Correct": 0, "Incorrect": 0})
        opinion = row.get("opinion")
        if opinion in ("Correct", "Incorrect"):
            stats[opinion] += 1
    for stats in table.values():
        stats["total"] = stats["Correct"] + stats["Incorrect"]
        stats["accuracy"] = half_up_pct(stats["Correct"], stats["total"])
    return dict(sorted(table.items()))
