"""Chat-completion access and response parsing.

One user-only message per call, temperature pinned to 0. The HTTP backend
retries transient failures with exponential backoff; the mock backend
replays fixture files keyed by (template name, SHA-256 of the rendered
prompt) so pipeline runs are reproducible offline.

Label parsing is leading-token based: models answer with the label first
and an explanation after, in whatever capitalization they like. Responses
that do not start with a known label raise UnparseableResponse; callers
keep those as their own outcome bucket instead of coercing them.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass

import requests

YES = "Yes"
NO = "No"
SUPPORTED = "Supported"
CONTRADICTORY = "Contradictory"
NEITHER = "Neither"
UNPARSEABLE = "Unparseable"


class ConfigurationError(RuntimeError):
    """The endpoint, credential, or model id is not configured."""


class TransportError(RuntimeError):
    """All attempts failed; carries the last status or cause."""


class UnparseableResponse(ValueError):
    """No recognized label at the head of the response."""

    def __init__(self, raw: str):
        super().__init__(f"no label found in response head: {raw[:80]!r}")
        self.raw = raw


class MockMissError(KeyError):
    """The mock backend has no fixture or rule for a prompt."""


@dataclass
class Verdict:
    label: str
    explanation: str = ""

    def as_dict(self) -> dict:
        return {"label": self.label, "explanation": self.explanation}


@dataclass
class LlmExchange:
    template: str
    prompt: str
    raw_response: str
    model_id: str
    latency_ms: int = 0
    attempt: int = 1
    truncated: bool = False

    def as_dict(self) -> dict:
        return {
            "template": self.template,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "model_id": self.model_id,
            "latency_ms": self.latency_ms,
            "attempt": self.attempt,
            "truncated": self.truncated,
        }


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# -- parsing ---------------------------------------------------------------

_HEAD_STRIP = " \t\r\n*_#`>\"'([-"


def _head(raw: str) -> tuple[str, str]:
    """First word of the response (lowercased, markdown stripped) and the
    remainder."""
    text = raw.lstrip(_HEAD_STRIP)
    match = re.match(r"[A-Za-z]+", text)
    if not match:
        return "", ""
    rest = text[match.end():].lstrip(" \t:,.!)*_`-")
    return match.group(0).lower(), rest


def parse_yes_no(raw: str) -> Verdict:
    """Yes/No plus explanation, e.g. "Yes, the answer ..." or "No. It ..."."""
    head, rest = _head(raw)
    if head == "yes":
        return Verdict(YES, rest.strip())
    if head == "no":
        return Verdict(NO, rest.strip())
    raise UnparseableResponse(raw)


def parse_scn(raw: str) -> Verdict:
    """Supported / Contradictory / Neither plus explanation."""
    head, rest = _head(raw)
    labels = {"supported": SUPPORTED, "contradictory": CONTRADICTORY, "neither": NEITHER}
    if head in labels:
        return Verdict(labels[head], rest.strip())
    raise UnparseableResponse(raw)


_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_statement_list(raw: str) -> list[str]:
    """Bullet lines with their markers stripped, blank lines dropped.

    An empty list is a legal outcome; it models replies from which no
    statement could be extracted.
    """
    statements = []
    for line in raw.splitlines():
        line = _BULLET_RE.sub("", line).strip()
        if line:
            statements.append(line)
    return statements


def is_no_answer(raw: str) -> bool:
    """True when a summarization reply declines with a leading "No Answer"."""
    return raw.strip().lstrip(_HEAD_STRIP).lower().startswith("no answer")


# -- backends ----------------------------------------------------------------


@dataclass
class LlmSettings:
    base_url: str = ""
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "EVICHECK_API_KEY"
    retry_limit: int = 3
    backoff_base: float = 1.0
    rate_limit_per_min: float = 0.0
    max_response_tokens: int = 512
    timeout: float = 60.0


class HttpBackend:
    """JSON chat-completion protocol over HTTP (OpenAI-style)."""

    def __init__(self, settings: LlmSettings, session=None):
        if not settings.base_url:
            raise ConfigurationError("no LLM base URL configured")
        key = os.environ.get(settings.api_key_env, "")
        if not key:
            raise ConfigurationError(
                f"credential environment variable {settings.api_key_env} is not set"
            )
        self.settings = settings
        self._key = key
        self._session = session or requests.Session()

    def complete(self, template: str, prompt: str) -> LlmExchange:
        settings = self.settings
        url = settings.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": settings.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "max_tokens": settings.max_response_tokens,
        }
        headers = {"Authorization": f"Bearer {self._key}"}
        last = "no attempt made"
        started = time.monotonic()
        for attempt in range(1, settings.retry_limit + 1):
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=settings.timeout)
            except requests.RequestException as exc:
                last = f"transport failure: {exc}"
            else:
                if resp.status_code == 200:
                    payload = resp.json()
                    choice = payload["choices"][0]
                    return LlmExchange(
                        template=template,
                        prompt=prompt,
                        raw_response=choice["message"]["content"],
                        model_id=payload.get("model", settings.model),
                        latency_ms=int((time.monotonic() - started) * 1000),
                        attempt=attempt,
                        truncated=choice.get("finish_reason") == "length",
                    )
                if resp.status_code in (408, 429) or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                else:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < settings.retry_limit:
                time.sleep(settings.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(f"exhausted {settings.retry_limit} attempts; last: {last}")


class MockBackend:
    """Scripted responses for offline runs and tests.

    Lookup order: exact fixture for (template, prompt sha256); per-template
    rule (a string or a callable taking the prompt); global default.
    """

    def __init__(self, fixtures=None, rules=None, default=None, model_id="mock"):
        self.fixtures: dict[tuple[str, str], str] = dict(fixtures or {})
        self.rules = dict(rules or {})
        self.default = default
        self.model_id = model_id

    @classmethod
    def from_jsonl(cls, path, **kwargs) -> "MockBackend":
        fixtures = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                fixtures[(row["template"], row["prompt_sha256"])] = row["response"]
        return cls(fixtures=fixtures, **kwargs)

    def add_fixture(self, template: str, prompt: str, response: str) -> None:
        self.fixtures[(template, prompt_sha256(prompt))] = response

    def complete(self, template: str, prompt: str) -> LlmExchange:
        key = (template, prompt_sha256(prompt))
        if key in self.fixtures:
            raw = self.fixtures[key]
        elif template in self.rules:
            rule = self.rules[template]
            raw = rule(prompt) if callable(rule) else rule
        elif self.default is not None:
            raw = self.default(prompt) if callable(self.default) else self.default
        else:
            raise MockMissError(
                f"no fixture for template {template!r}, sha {key[1][:12]}..."
            )
        return LlmExchange(
            template=template,
            prompt=prompt,
            raw_response=raw,
            model_id=self.model_id,
        )


def write_fixtures_jsonl(path, rows) -> None:
    """rows: iterable of (template, prompt, response)."""
    with open(path, "w", encoding="utf-8") as fh:
        for template, prompt, response in rows:
            fh.write(json.dumps({
                "template": template,
                "prompt_sha256": prompt_sha256(prompt),
                "response": response,
            }) + "\n")


class LlmClient:
    """Backend wrapper adding a cross-thread rate limit and call counting."""

    def __init__(self, backend, rate_limit_per_min: float = 0.0):
        self._backend = backend
        self._interval = 60.0 / rate_limit_per_min if rate_limit_per_min > 0 else 0.0
        self._lock = threading.Lock()
        self._last_call = 0.0
        self.calls = 0

    def complete(self, template: str, prompt: str) -> LlmExchange:
        if self._interval:
            with self._lock:
                wait = self._last_call + self._interval - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
                self._last_call = time.monotonic()
        with self._lock:
            self.calls += 1
        return self._backend.complete(template, prompt)
