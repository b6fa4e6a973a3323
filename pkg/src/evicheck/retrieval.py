"""Evidence retrieval backends used by both pipelines.

BM25 runs in-process against the inverted index; the neural stack lives in
a sidecar service reached over HTTP, whose responses carry passage text so
no second corpus lookup is required.
"""

from __future__ import annotations

import requests

from .bm25 import InvertedIndex
from .corpus import Corpus


class ServiceUnavailableError(RuntimeError):
    """The neural retrieval service is unreachable or not ready."""


class Bm25Retriever:
    name = "bm25"

    def __init__(self, index: InvertedIndex, corpus: Corpus):
        self.index = index
        self.corpus = corpus

    def top(self, query: str, k: int) -> list[tuple[int, str]]:
        return [(pid, self.corpus.text(pid)) for pid, _ in self.index.search(query, k)]


class NeuralRetriever:
    """Client for the sidecar's JSON protocol (POST /retrieve, GET /health)."""

    name = "neural"

    def __init__(self, base_url: str, timeout: float = 120.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def check_health(self) -> dict:
        """Raise unless the service reports models and index ready."""
        try:
            resp = self._session.get(self.base_url + "/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise ServiceUnavailableError(f"health check failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceUnavailableError(f"health check returned HTTP {resp.status_code}")
        status = resp.json()
        if not (status.get("models_loaded") and status.get("index_ready")):
            raise ServiceUnavailableError(f"service not ready: {status}")
        return status

    def top(self, query: str, k: int) -> list[tuple[int, str]]:
        try:
            resp = self._session.post(
                self.base_url + "/retrieve",
                json={"query": query, "k": k},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ServiceUnavailableError(f"retrieve failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceUnavailableError(f"retrieve returned HTTP {resp.status_code}")
        body = resp.json()
        return [(int(c["pid"]), c["text"]) for c in body.get("candidates", [])]
