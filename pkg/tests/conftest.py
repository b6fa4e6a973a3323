"""Shared fixtures and independent oracles.

The BM25 oracle here is deliberately naive: plain dicts, a full scan of
every passage, and the scoring formula transcribed directly. It shares no
code path with the index under test.
"""

from __future__ import annotations

import math
from collections import Counter

import pytest

from evicheck.corpus import Corpus, Passage, TokenizerConfig, tokenize


def oracle_scores(passages: dict[int, str], query: str, k1=0.82, b=0.68,
                  config=TokenizerConfig()) -> dict[int, float]:
    """Score every passage for `query` by brute force.

    Follows the pinned scoring reduction: unique query terms in
    first-occurrence order, each contributing qtf * (idf * tf * (k1+1) /
    (tf + k1 * (1 - b + b * (dl/avgdl)))).
    """
    tokenized = {pid: tokenize(text, config) for pid, text in passages.items()}
    n = len(passages)
    avg_len = sum(len(t) for t in tokenized.values()) / n if n else 0.0
    df = Counter()
    for tokens in tokenized.values():
        for term in set(tokens):
            df[term] += 1
    query_terms = tokenize(query, config)
    unique_terms = list(dict.fromkeys(query_terms))
    qtf = Counter(query_terms)
    scores = {}
    for pid, tokens in tokenized.items():
        tf = Counter(tokens)
        norm = k1 * (1 - b + b * (len(tokens) / avg_len))
        total = 0.0
        for term in unique_terms:
            if tf[term] == 0:
                continue
            idf = math.log(1 + (n - df[term] + 0.5) / (df[term] + 0.5))
            total += qtf[term] * (idf * tf[term] * (k1 + 1) / (tf[term] + norm))
        scores[pid] = total
    return scores


def oracle_ranking(passages: dict[int, str], query: str, k1=0.82, b=0.68,
                   config=TokenizerConfig()) -> list[tuple[int, float]]:
    """Full ranking of matching passages: descending score, ascending pid."""
    scores = oracle_scores(passages, query, k1, b, config)
    matching = [(pid, s) for pid, s in scores.items() if s > 0]
    return sorted(matching, key=lambda item: (-item[1], item[0]))


def make_corpus(passages: dict[int, str], config=TokenizerConfig()) -> Corpus:
    return Corpus([Passage(pid, text) for pid, text in passages.items()], config)


@pytest.fixture
def tiny_passages():
    return {0: "a b a", 1: "b c"}


@pytest.fixture
def tiny_corpus(tiny_passages):
    return make_corpus(tiny_passages)
