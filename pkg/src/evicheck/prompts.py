"""The seven fixed prompt bodies used by the pipelines.

Template text is frozen, wording and quirks included; tests pin a SHA-256
per body. Placeholders are written `{name}` (names may contain spaces) and
are substituted in a single pass: brace sequences inside substituted
values are never re-expanded.
"""

from __future__ import annotations

import re

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")

ANSWER = (
    "You are an expert in this field. Please answer the question as simply "
    "and concisely as possible.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Answer:"
)

DIRECT_CHECK = (
    "I want you to act as an assessor of the answer. You will be given a "
    "question and an answer, and you need to determine whether the answer "
    "directly answers the question. Examples of non-direct answers would be "
    "claiming it does not know or does not have enough information, and "
    "provide some alternative ways to find answers. Also note that if an "
    "answer claims that the question itself is wrong, it also is a form of "
    "direct answer. Your response should be 'Yes' if the answer actually "
    "answers the question, ad 'No' if the answer does not actually answer "
    "the question. Please also include a short and concise explanation of "
    "your classification.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Answer: {answer}"
)

SUPPORT_CHECK = (
    "I want you to act as an assessor of the answer. You will be provided "
    "with a question, an answer, and relevant evidence. Your task is to "
    "assess whether the evidence provided supports the given answer. If the "
    "evidence supports the answer, reply with a 'Yes'. Otherwise, reply "
    "with a 'No'. Please also include a short and concise explanation of "
    "your classification.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Answer: {LLM answer}\n"
    "\n"
    "Evidence: {Retrieved answer}"
)

READER = (
    "I want you to act as a question-based summarizer for a set of "
    "passages. Given a question and a passage containing answer to the "
    "question, your task is to provide a clear and concise summary of the "
    "passage that directly answer the question and contain minimal extra "
    "information. Your summary should be easy to understand and accurately "
    "represent the passage. Keep in mind that your summary should be "
    "objective and avoid including personal opinions or biases. If the "
    "passage does not answer, simply reply with 'No Answer', otherwise "
    "reply with just the summary itself and nothing else.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Passage 1: {passage1}\n"
    "\n"
    "Passage 2: {passage2}\n"
    "\n"
    "Passage 3: {passage3}"
)

FACT_EXTRACT = (
    "I want you to act as a language expert. Your task is given a question "
    "and a proposed answer, extract concise and relevant factual statements "
    "from the proposed answer. Include only statements that have a truth "
    "value and are worth validating, and ignore subjective claims. You "
    "should generate a bullet list of statements that are potentially true "
    "or false based on the question and proposed answer. Please only reply "
    "with the bullet list and nothing else.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Proposed Answer: {proposed answer}"
)

FACT_VALIDATE = (
    "I want you to act as a language expert and assist in determining the "
    "relationship between a factual statement and a piece of evidence. "
    "Here's how you should handle it:\n"
    "If the evidence supports the statement, reply with only the word "
    "'Supported'.\n"
    "If the evidence contradicts the statement, reply with only the word "
    "'Contradictory'.\n"
    "If the evidence is not relevant to the statement (neither supports nor "
    "contradicts it), reply with only the word 'Neither'.\n"
    "Your response should be a simple label 'Supported', 'Contradictory', "
    "or 'Neither', followed by a short and concise explanation of your "
    "classification.\n"
    "\n"
    "Statement: {statement}\n"
    "\n"
    "Evidence: {passage}"
)

FACT_POST_EDIT = (
    "I want you to act as a language expert and assist in post editing a "
    "false statement using a given piece of evidence. Your objective is to "
    "make minimal changes to the original statement while correcting it. "
    "Be concise. If the original false statement is one sentence, your "
    "corrected statement should also only be one sentence. Do not add more "
    "facts to the original statement, but only correct the wrong part of "
    "the original false statement. Please only reply with the corrected "
    "statement and nothing else.\n"
    "\n"
    "Statement: {statement}\n"
    "\n"
    "Evidence: {passage}"
)

TEMPLATES: dict[str, str] = {
    "Answer": ANSWER,
    "DirectCheck": DIRECT_CHECK,
    "SupportCheck": SUPPORT_CHECK,
    "Reader": READER,
    "FactExtract": FACT_EXTRACT,
    "FactValidate": FACT_VALIDATE,
    "FactPostEdit": FACT_POST_EDIT,
}


class BindingError(ValueError):
    """Render bindings do not exactly cover the template placeholders."""


def placeholders(body: str) -> list[str]:
    return _PLACEHOLDER_RE.findall(body)


def render(template: str, bindings: dict[str, str]) -> str:
    """Substitute every placeholder of `template` exactly once.

    `template` may be a template name or a raw body. Missing or extra
    binding keys raise BindingError naming the offenders.
    """
    body = TEMPLATES.get(template, template)
    names = set(placeholders(body))
    given = set(bindings)
    if names != given:
        missing = sorted(names - given)
        extra = sorted(given - names)
        parts = []
        if missing:
            parts.append(f"missing bindings: {missing}")
        if extra:
            parts.append(f"extra bindings: {extra}")
        raise BindingError("; ".join(parts))
    return _PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], body)
