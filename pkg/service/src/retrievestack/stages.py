"""Retrieval and reranking stages.

Each stage is a plain class with a `top` or scoring method so a backend
with real learned models can be substituted behind the same engine. The
default implementations are deterministic lightweight scorers: an
inverted-index lexical stage, a hashed-embedding dense stage, and two
cross-scoring stages (pointwise over the pooled candidates, pairwise over
the head of the pointwise ranking).
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .text import embed, overlap, tokenize


class SparseStage:
    """Impact-scored lexical retrieval over an in-memory inverted index."""

    def __init__(self, texts: dict[int, str], k1: float = 0.9, b: float = 0.4):
        self.k1 = k1
        self.b = b
        self._postings: dict[str, list[tuple[int, int]]] = {}
        self._doc_len: dict[int, int] = {}
        for pid in sorted(texts):
            tokens = tokenize(texts[pid])
            self._doc_len[pid] = len(tokens)
            for term, tf in Counter(tokens).items():
                self._postings.setdefault(term, []).append((pid, tf))
        self._n = len(texts)
        total = sum(self._doc_len.values())
        self._avg = total / self._n if self._n else 0.0

    def top(self, query: str, k: int) -> list[tuple[int, float]]:
        scores: dict[int, float] = {}
        for term, qtf in Counter(tokenize(query)).items():
            postings = self._postings.get(term)
            if not postings:
                continue
            idf = math.log(1 + (self._n - len(postings) + 0.5) / (len(postings) + 0.5))
            for pid, tf in postings:
                norm = self.k1 * (1 - self.b + self.b * (self._doc_len[pid] / self._avg))
                scores[pid] = scores.get(pid, 0.0) + qtf * (idf * tf * (self.k1 + 1) / (tf + norm))
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return ranked[:k]


class DenseStage:
    """Brute-force cosine retrieval over deterministic hashed embeddings."""

    def __init__(self, texts: dict[int, str], dim: int = 256, seed: int = 13):
        self.dim = dim
        self.seed = seed
        self._pids = np.array(sorted(texts), dtype=np.int64)
        self._matrix = np.stack([embed(texts[int(pid)], dim, seed) for pid in self._pids]) \
            if len(self._pids) else np.zeros((0, dim))

    def top(self, query: str, k: int) -> list[tuple[int, float]]:
        if not len(self._pids):
            return []
        scores = self._matrix @ embed(query, self.dim, self.seed)
        order = np.lexsort((self._pids, -scores))[:k]
        return [(int(self._pids[i]), float(scores[i])) for i in order]


class PointwiseStage:
    """Query-passage relevance in (0, 1), blending lexical overlap with
    embedding similarity."""

    def __init__(self, dim: int = 256, seed: int = 13):
        self.dim = dim
        self.seed = seed

    def score(self, query: str, text: str) -> float:
        q_tokens = tokenize(query)
        lexical = overlap(q_tokens, tokenize(text))
        cosine = float(embed(query, self.dim, self.seed) @ embed(text, self.dim, self.seed))
        logit = 4.0 * lexical + 2.0 * cosine - 1.5
        return 1.0 / (1.0 + math.exp(-logit))


class PairwiseStage:
    """Head-of-ranking refinement from pairwise preference probabilities.

    The aggregate for candidate i is the symmetric sum over opponents j of
    p(i beats j) + (1 - p(j beats i)).
    """

    def __init__(self, pointwise: PointwiseStage, sharpness: float = 6.0):
        self.pointwise = pointwise
        self.sharpness = sharpness

    def prob_beats(self, query: str, text_a: str, text_b: str) -> float:
        delta = self.pointwise.score(query, text_a) - self.pointwise.score(query, text_b)
        return 1.0 / (1.0 + math.exp(-self.sharpness * delta))

    def rerank(self, query: str, candidates: list[tuple[int, str]]) -> list[tuple[int, float]]:
        if len(candidates) <= 1:
            return [(pid, 0.0) for pid, _ in candidates]
        totals = []
        for i, (pid_i, text_i) in enumerate(candidates):
            total = 0.0
            for j, (pid_j, text_j) in enumerate(candidates):
                if i == j:
                    continue
                total += self.prob_beats(query, text_i, text_j)
                total += 1.0 - self.prob_beats(query, text_j, text_i)
            totals.append((pid_i, total))
        return sorted(totals, key=lambda item: (-item[1], item[0]))
