"""Answer verification against a passage corpus.

Generate an answer, retrieve candidate evidence with the question plus the
answer as the query, and have the model judge its own output against what
came back; or decompose the answer into factual statements, check each
against its own retrieved passage, repair contradicted ones, and reassemble
a fully attributed answer.
"""

from .bm25 import Bm25Params, InvertedIndex, build_index, mrr_at_k
from .corpus import (
    Corpus,
    Passage,
    QrelSet,
    Question,
    TokenizerConfig,
    load_collection,
    load_qrels,
    load_queries,
    tokenize,
)
from .llm import (
    LlmClient,
    LlmExchange,
    MockBackend,
    UnparseableResponse,
    Verdict,
    parse_scn,
    parse_statement_list,
    parse_yes_no,
)
from .prompts import TEMPLATES, render

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "Corpus",
    "InvertedIndex",
    "LlmClient",
    "LlmExchange",
    "MockBackend",
    "Passage",
    "QrelSet",
    "Question",
    "TEMPLATES",
    "TokenizerConfig",
    "UnparseableResponse",
    "Verdict",
    "build_index",
    "load_collection",
    "load_qrels",
    "load_queries",
    "mrr_at_k",
    "parse_scn",
    "parse_statement_list",
    "parse_yes_no",
    "render",
    "tokenize",
]
