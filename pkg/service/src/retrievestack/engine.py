"""Candidate pooling and multi-stage reranking.

Flow per query: take the top `pool_depth` from the sparse and dense
stages, union them by passage id, score the whole pool pointwise, rerank
the pointwise top `head_size` pairwise, then emit the pairwise head
followed by the remaining pool in pointwise order. Passages outside the
head can therefore never outrank the head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .stages import DenseStage, PairwiseStage, PointwiseStage, SparseStage


@dataclass
class Candidate:
    pid: int
    text: str
    stage_scores: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"pid": self.pid, "text": self.text, "stage_scores": self.stage_scores}


class RetrievalEngine:
    def __init__(self, texts: dict[int, str], pool_depth: int = 100,
                 head_size: int = 10, dim: int = 256, seed: int = 13):
        self.pool_depth = pool_depth
        self.head_size = head_size
        self._texts = dict(texts)
        self.sparse = SparseStage(self._texts)
        self.dense = DenseStage(self._texts, dim=dim, seed=seed)
        self.pointwise = PointwiseStage(dim=dim, seed=seed)
        self.pairwise = PairwiseStage(self.pointwise)

    @property
    def doc_count(self) -> int:
        return len(self._texts)

    def retrieve(self, query: str, k: int) -> list[Candidate]:
        sparse_hits = self.sparse.top(query, self.pool_depth)
        dense_hits = self.dense.top(query, self.pool_depth)

        pool: dict[int, Candidate] = {}
        for pid, score in sparse_hits:
            pool[pid] = Candidate(pid, self._texts[pid], {"sparse": score})
        for pid, score in dense_hits:
            candidate = pool.get(pid)
            if candidate is None:
                candidate = Candidate(pid, self._texts[pid], {})
                pool[pid] = candidate
            candidate.stage_scores["dense"] = score

        for candidate in pool.values():
            candidate.stage_scores["pointwise"] = self.pointwise.score(query, candidate.text)

        by_pointwise = sorted(
            pool.values(),
            key=lambda c: (-c.stage_scores["pointwise"], c.pid),
        )
        head = by_pointwise[: self.head_size]
        tail = by_pointwise[self.head_size:]

        reranked = self.pairwise.rerank(query, [(c.pid, c.text) for c in head])
        pairwise_scores = dict(reranked)
        for candidate in head:
            candidate.stage_scores["pairwise"] = pairwise_scores[candidate.pid]
        head_by_pair = sorted(
            head, key=lambda c: (-c.stage_scores["pairwise"], c.pid))

        final = head_by_pair + tail
        return final[:k]
