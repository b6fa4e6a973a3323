"""Inverted index with Okapi BM25 scoring, top-k search, and MRR@k.

Postings are stored in a compressed sparse layout: one concatenated
document-position array plus one term-frequency array, sliced per term via
an offsets table. Search touches only the postings of query terms, never
the rest of the collection.

Score of passage d for query q:

    sum over query terms t of
        idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * (dl/avgdl)))

with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is non-negative
for every df <= N. Repeated query terms contribute once per occurrence;
the reduction is pinned for reproducibility: unique terms are visited in
first-occurrence order and each contributes qtf * (idf * tf * (k1+1) /
(tf + norm)), evaluated left to right, so rankings are stable down to the
last float ulp across implementations that follow the same convention.
"""

from __future__ import annotations

import json
import math
import struct
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, TokenizerConfig, tokenize

CACHE_VERSION = 1
_CACHE_MAGIC = b"BM25IDX"


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.82
    b: float = 0.68

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


class EmptyCorpusError(ValueError):
    """Building an index over zero passages is rejected."""


class UnknownPassageError(KeyError):
    """Scoring was asked about a passage id the index does not hold."""


# A ranked result is a list of (pid, score) with non-increasing scores;
# ties are broken by ascending passage id.
RankedList = list[tuple[int, float]]


class InvertedIndex:
    """Immutable BM25 index over one corpus snapshot."""

    def __init__(
        self,
        terms: dict[str, int],
        offsets: np.ndarray,
        post_pos: np.ndarray,
        post_tf: np.ndarray,
        pids: np.ndarray,
        doc_lens: np.ndarray,
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    ):
        self._terms = terms
        self._offsets = offsets
        self._post_pos = post_pos
        self._post_tf = post_tf
        self._pids = pids
        self._doc_lens = doc_lens
        self.params = params
        self.tokenizer = tokenizer
        self.doc_count = int(len(pids))
        self.avg_doc_len = float(doc_lens.mean()) if self.doc_count else 0.0
        self._pos_by_pid = {int(p): i for i, p in enumerate(pids)}
        # Per-document length normalization, precomputed once. A corpus
        # whose passages tokenize to nothing has no postings to score, so
        # any finite norm works; avoid the 0/0.
        k1, b = params.k1, params.b
        avg = self.avg_doc_len if self.avg_doc_len > 0 else 1.0
        self._norm = k1 * (1.0 - b + b * (doc_lens / avg))

    # -- introspection ----------------------------------------------------

    @property
    def vocabulary_size(self) -> int:
        return len(self._terms)

    def doc_len(self, pid: int) -> int:
        return int(self._doc_lens[self._position(pid)])

    def df(self, term: str) -> int:
        slot = self._terms.get(term)
        if slot is None:
            return 0
        return int(self._offsets[slot + 1] - self._offsets[slot])

    def postings(self, term: str) -> list[tuple[int, int]]:
        """(pid, tf) pairs for `term`, ascending by pid."""
        slot = self._terms.get(term)
        if slot is None:
            return []
        lo, hi = int(self._offsets[slot]), int(self._offsets[slot + 1])
        pids = self._pids[self._post_pos[lo:hi]]
        tfs = self._post_tf[lo:hi]
        return [(int(p), int(t)) for p, t in zip(pids, tfs)]

    def idf(self, term: str) -> float:
        df = self.df(term)
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def _position(self, pid: int) -> int:
        try:
            return self._pos_by_pid[pid]
        except KeyError:
            raise UnknownPassageError(f"unknown passage id {pid}") from None

    # -- scoring ----------------------------------------------------------

    def score(self, query_terms: list[str], pid: int) -> float:
        """BM25 score of one passage; absent query terms contribute 0."""
        pos = self._position(pid)
        k1 = self.params.k1
        norm = float(self._norm[pos])
        total = 0.0
        for term, qtf in Counter(query_terms).items():
            slot = self._terms.get(term)
            if slot is None:
                continue
            lo, hi = int(self._offsets[slot]), int(self._offsets[slot + 1])
            span = self._post_pos[lo:hi]
            i = int(np.searchsorted(span, pos))
            if i >= len(span) or span[i] != pos:
                continue
            tf = float(self._post_tf[lo + i])
            total += qtf * (self.idf(term) * tf * (k1 + 1.0) / (tf + norm))
        return total

    def search(self, query: str, k: int) -> RankedList:
        """Top-k passages with positive score for `query`."""
        if k < 1:
            raise ValueError("k must be >= 1")
        terms = tokenize(query, self.tokenizer)
        if not terms:
            return []
        k1 = self.params.k1
        scores = np.zeros(self.doc_count, dtype=np.float64)
        touched = []
        for term, qtf in Counter(terms).items():
            slot = self._terms.get(term)
            if slot is None:
                continue
            lo, hi = int(self._offsets[slot]), int(self._offsets[slot + 1])
            pos = self._post_pos[lo:hi]
            tf = self._post_tf[lo:hi].astype(np.float64)
            scores[pos] += qtf * (self.idf(term) * tf * (k1 + 1.0) / (tf + self._norm[pos]))
            touched.append(pos)
        if not touched:
            return []
        cand = np.unique(np.concatenate(touched))
        cand_scores = scores[cand]
        cand_pids = self._pids[cand]
        order = np.lexsort((cand_pids, -cand_scores))[:k]
        return [(int(cand_pids[i]), float(cand_scores[i])) for i in order]

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Write the cache file.

        Layout (little-endian): version byte; 7-byte magic "BM25IDX";
        uint32 header length; UTF-8 JSON header (params, tokenizer flags,
        array dtypes and element counts); then the raw array blobs in
        order: pids, doc_lens, offsets, post_pos, post_tf; finally the
        newline-joined vocabulary, UTF-8.
        """
        vocab_sorted = sorted(self._terms, key=self._terms.get)
        vocab_blob = "\n".join(vocab_sorted).encode("utf-8")
        arrays = [
            ("pids", self._pids),
            ("doc_lens", self._doc_lens),
            ("offsets", self._offsets),
            ("post_pos", self._post_pos),
            ("post_tf", self._post_tf),
        ]
        header = {
            "k1": self.params.k1,
            "b": self.params.b,
            "tokenizer": self.tokenizer.key(),
            "doc_count": self.doc_count,
            "avg_doc_len": self.avg_doc_len,
            "arrays": [(name, str(arr.dtype), int(arr.size)) for name, arr in arrays],
            "vocab_bytes": len(vocab_blob),
        }
        blob = json.dumps(header).encode("utf-8")
        tmp = Path(str(path) + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(bytes([CACHE_VERSION]))
            fh.write(_CACHE_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for _, arr in arrays:
                fh.write(arr.tobytes())
            fh.write(vocab_blob)
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "InvertedIndex":
        with open(path, "rb") as fh:
            version = fh.read(1)
            if not version or version[0] != CACHE_VERSION:
                raise ValueError(f"{path}: unsupported index cache version")
            if fh.read(len(_CACHE_MAGIC)) != _CACHE_MAGIC:
                raise ValueError(f"{path}: not an index cache file")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            arrays = {}
            for name, dtype, size in header["arrays"]:
                arr = np.frombuffer(fh.read(np.dtype(dtype).itemsize * size), dtype=dtype)
                arrays[name] = arr
            vocab = fh.read(header["vocab_bytes"]).decode("utf-8")
        terms = {t: i for i, t in enumerate(vocab.split("\n"))} if vocab else {}
        stem_flag, stop_flag = header["tokenizer"].split(",")
        tokenizer = TokenizerConfig(
            stemming=stem_flag == "stem=1", stopwords=stop_flag == "stop=1"
        )
        return cls(
            terms=terms,
            offsets=arrays["offsets"],
            post_pos=arrays["post_pos"],
            post_tf=arrays["post_tf"],
            pids=arrays["pids"],
            doc_lens=arrays["doc_lens"],
            params=Bm25Params(header["k1"], header["b"]),
            tokenizer=tokenizer,
        )

    def matches(self, params: Bm25Params, tokenizer: TokenizerConfig) -> bool:
        return self.params == params and self.tokenizer == tokenizer


def build_index(corpus: Corpus, params: Bm25Params = Bm25Params()) -> InvertedIndex:
    """Index every passage of `corpus` under its tokenizer config."""
    if corpus.doc_count == 0:
        raise EmptyCorpusError("cannot index an empty corpus")
    terms: dict[str, int] = {}
    chunk_term: list[np.ndarray] = []
    chunk_pos: list[np.ndarray] = []
    chunk_tf: list[np.ndarray] = []
    buf_term: list[int] = []
    buf_pos: list[int] = []
    buf_tf: list[int] = []
    doc_lens = np.empty(corpus.doc_count, dtype=np.int32)
    pids = np.empty(corpus.doc_count, dtype=np.int64)

    config = corpus.tokenizer

    def flush():
        if buf_term:
            chunk_term.append(np.asarray(buf_term, dtype=np.int64))
            chunk_pos.append(np.asarray(buf_pos, dtype=np.int64))
            chunk_tf.append(np.asarray(buf_tf, dtype=np.int64))
            buf_term.clear()
            buf_pos.clear()
            buf_tf.clear()

    for pos, passage in enumerate(corpus):
        tokens = tokenize(passage.text, config)
        counts = Counter(tokens)
        doc_lens[pos] = len(tokens)
        pids[pos] = passage.pid
        for term, tf in counts.items():
            slot = terms.get(term)
            if slot is None:
                slot = len(terms)
                terms[term] = slot
            buf_term.append(slot)
            buf_pos.append(pos)
            buf_tf.append(tf)
        if len(buf_term) >= 1 << 22:
            flush()
    flush()

    corpus.set_doc_lens(doc_lens.tolist())

    if chunk_term:
        term_arr = np.concatenate(chunk_term)
        pos_arr = np.concatenate(chunk_pos)
        tf_arr = np.concatenate(chunk_tf)
    else:
        term_arr = np.empty(0, dtype=np.int64)
        pos_arr = np.empty(0, dtype=np.int64)
        tf_arr = np.empty(0, dtype=np.int64)

    # Group postings by term, then order each slice by passage id.
    order = np.lexsort((pids[pos_arr], term_arr))
    term_arr = term_arr[order]
    pos_arr = pos_arr[order].astype(np.int64)
    tf_arr = tf_arr[order].astype(np.int64)
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    np.add.at(offsets, term_arr + 1, 1)
    offsets = np.cumsum(offsets)

    return InvertedIndex(
        terms=terms,
        offsets=offsets,
        post_pos=pos_arr,
        post_tf=tf_arr,
        pids=pids,
        doc_lens=doc_lens,
        params=params,
        tokenizer=config,
    )


def load_or_build(cache_path, corpus: Corpus, params: Bm25Params):
    """Reuse a cache file when its params and tokenizer flags match the
    request, otherwise rebuild from the corpus and rewrite the cache.

    Returns (index, built, seconds).
    """
    cache_path = Path(cache_path)
    if cache_path.exists():
        try:
            index = InvertedIndex.load(cache_path)
            if index.matches(params, corpus.tokenizer) and index.doc_count == corpus.doc_count:
                return index, False, 0.0
        except (ValueError, KeyError, json.JSONDecodeError):
            pass
    started = time.monotonic()
    index = build_index(corpus, params)
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    index.save(cache_path)
    return index, True, time.monotonic() - started


def mrr_at_k(rankings: dict[int, RankedList], qrels, k: int = 10) -> float:
    """Mean reciprocal rank of the first relevant passage within the top k.

    Queries with no relevant passage in their top k, including queries
    absent from the judgments, contribute 0 and stay in the denominator.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not rankings:
        raise ValueError("no rankings to evaluate")
    total = 0.0
    for qid, ranked in rankings.items():
        relevant = set(qrels.relevant(qid))
        for rank, (pid, _score) in enumerate(ranked[:k], start=1):
            if pid in relevant:
                total += 1.0 / rank
                break
    return total / len(rankings)
