"""Passage collections, query sets, and relevance judgments.

Collections and queries are tab-separated `<id>\\t<text>` files; judgments
use the four-column whitespace-separated qrels layout. Tokenization is the
single normalization point shared by the corpus and the index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .stemmer import stem

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Lucene's classic English stopword list; removal is opt-in.
STOPWORDS = frozenset(
    "a an and are as at be but by for if in into is it no not of on or such "
    "that the their then there these they this to was will with".split()
)


class ParseError(ValueError):
    """A data file line that does not match the expected layout."""


class DuplicateKeyError(ValueError):
    """Two records in one file share an identifier."""


@dataclass(frozen=True)
class TokenizerConfig:
    """Normalization flags; these participate in index cache invalidation."""

    stemming: bool = True
    stopwords: bool = False

    def key(self) -> str:
        return f"stem={int(self.stemming)},stop={int(self.stopwords)}"


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Lowercase, split on runs of non-alphanumeric characters, then
    optionally drop stopwords and apply Porter stemming."""
    tokens = _TOKEN_RE.findall(text.lower())
    if config.stopwords:
        tokens = [t for t in tokens if t not in STOPWORDS]
    if config.stemming:
        tokens = [stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Passage:
    pid: int
    text: str


@dataclass(frozen=True)
class Question:
    qid: int
    text: str


class Corpus:
    """Immutable, insertion-ordered passage collection."""

    def __init__(self, passages: list[Passage], tokenizer: TokenizerConfig = TokenizerConfig()):
        self._passages = list(passages)
        self.tokenizer = tokenizer
        self._by_pid: dict[int, int] = {}
        for pos, passage in enumerate(self._passages):
            if passage.pid in self._by_pid:
                raise DuplicateKeyError(f"duplicate passage id {passage.pid}")
            self._by_pid[passage.pid] = pos
        self._doc_lens: list[int] | None = None

    def __len__(self) -> int:
        return len(self._passages)

    def __iter__(self):
        return iter(self._passages)

    def __contains__(self, pid: int) -> bool:
        return pid in self._by_pid

    @property
    def doc_count(self) -> int:
        return len(self._passages)

    def passage(self, pid: int) -> Passage:
        try:
            return self._passages[self._by_pid[pid]]
        except KeyError:
            raise KeyError(f"unknown passage id {pid}") from None

    def text(self, pid: int) -> str:
        return self.passage(pid).text

    def position(self, pid: int) -> int:
        return self._by_pid[pid]

    def pid_at(self, pos: int) -> int:
        return self._passages[pos].pid

    def doc_lens(self) -> list[int]:
        """Token count per passage, in insertion order (computed once)."""
        if self._doc_lens is None:
            self._doc_lens = [len(tokenize(p.text, self.tokenizer)) for p in self._passages]
        return self._doc_lens

    def set_doc_lens(self, lens: list[int]) -> None:
        """Install token counts computed elsewhere (the index builder
        tokenizes every passage anyway and shares the result)."""
        if len(lens) != len(self._passages):
            raise ValueError("doc length vector does not match passage count")
        self._doc_lens = list(lens)

    @property
    def avg_doc_len(self) -> float:
        if not self._passages:
            return 0.0
        lens = self.doc_lens()
        return sum(lens) / len(lens)

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for passage in self._passages:
                fh.write(f"{passage.pid}\t{passage.text}\n")


@dataclass
class QrelSet:
    """qid -> relevant passage ids, in file order, duplicates dropped."""

    by_qid: dict[int, list[int]] = field(default_factory=dict)

    def relevant(self, qid: int) -> list[int]:
        return self.by_qid.get(qid, [])

    def __len__(self) -> int:
        return len(self.by_qid)

    def __contains__(self, qid: int) -> bool:
        return qid in self.by_qid

    def missing_pids(self, corpus: Corpus) -> set[int]:
        """Judged passage ids that the corpus does not hold."""
        return {pid for pids in self.by_qid.values() for pid in pids if pid not in corpus}


def _parse_id_text_line(line: str, lineno: int, path: str) -> tuple[int, str]:
    if "\t" not in line:
        raise ParseError(f"{path}:{lineno}: expected <id><TAB><text>")
    raw_id, text = line.split("\t", 1)
    try:
        ident = int(raw_id)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-integer id {raw_id!r}") from None
    return ident, text


def load_collection(path, tokenizer: TokenizerConfig = TokenizerConfig()) -> Corpus:
    """Load a `<pid>\\t<passage>` collection, preserving file order."""
    passages = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            pid, text = _parse_id_text_line(line, lineno, str(path))
            if not text.strip():
                raise ParseError(f"{path}:{lineno}: empty passage text")
            if pid in seen:
                raise DuplicateKeyError(f"{path}:{lineno}: duplicate passage id {pid}")
            seen.add(pid)
            passages.append(Passage(pid, text))
    return Corpus(passages, tokenizer)


def load_queries(path) -> list[Question]:
    """Load a `<qid>\\t<question>` file; text after the first tab is kept
    verbatim, extra tabs included."""
    questions = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            qid, text = _parse_id_text_line(line, lineno, str(path))
            if qid in seen:
                raise DuplicateKeyError(f"{path}:{lineno}: duplicate query id {qid}")
            seen.add(qid)
            questions.append(Question(qid, text))
    return questions


def load_qrels(path) -> QrelSet:
    """Load `<qid> 0 <pid> <rel>` judgments, grouping pids by qid in file
    order. Lines with a non-positive relevance are skipped; duplicate
    (qid, pid) lines keep the first occurrence."""
    qrels = QrelSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 whitespace-separated fields")
            try:
                qid, _, pid, rel = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field") from None
            if rel <= 0:
                continue
            pids = qrels.by_qid.setdefault(qid, [])
            if pid not in pids:
                pids.append(pid)
    return qrels
