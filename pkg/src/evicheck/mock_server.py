"""Fixture-backed chat-completion HTTP server.

Speaks just enough of the JSON chat protocol for the pipelines to run
against it end to end without a live model: the response for a request is
looked up by the SHA-256 of its user message.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .llm import prompt_sha256


def _load_fixture_map(path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            mapping[row["prompt_sha256"]] = row["response"]
    return mapping


class _Handler(BaseHTTPRequestHandler):
    fixtures: dict[str, str] = {}
    default: str | None = None

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path.rstrip("/").endswith("/chat/completions"):
            length = int(self.headers.get("Content-Length", "0"))
            try:
                request = json.loads(self.rfile.read(length))
                prompt = request["messages"][-1]["content"]
            except (json.JSONDecodeError, KeyError, IndexError):
                self._reply(400, {"error": "malformed chat request"})
                return
            response = self.fixtures.get(prompt_sha256(prompt), self.default)
            if response is None:
                self._reply(404, {"error": "no fixture for prompt"})
                return
            self._reply(200, {
                "model": "mock",
                "choices": [{
                    "message": {"role": "assistant", "content": response},
                    "finish_reason": "stop",
                }],
            })
        else:
            self._reply(404, {"error": "unknown path"})


def make_server(fixtures_path, port: int = 0, default: str | None = None) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {
        "fixtures": _load_fixture_map(fixtures_path),
        "default": default,
    })
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_background(fixtures_path, port: int = 0, default: str | None = None):
    """Start the server on a daemon thread; returns (server, base_url)."""
    server = make_server(fixtures_path, port, default)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_address[1]}/v1"
