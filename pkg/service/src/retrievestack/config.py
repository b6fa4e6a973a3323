"""Service configuration.

A JSON file pins the collection path, port, pooling/rerank depths, and the
model identifiers for each stage. The default `lite` backend runs the
deterministic in-process scorers; `checkpoints` names the published model
ids a weights-backed deployment would load (recorded here with their
expected content digests so a substitution is detectable).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_CHECKPOINTS = {
    "sparse": {"model": "naver/splade-cocondenser-ensembledistil", "sha256": None},
    "dense": {"model": "castorini/ance-msmarco-passage", "sha256": None},
    "pointwise": {"model": "castorini/monot5-base-msmarco", "sha256": None},
    "pairwise": {"model": "castorini/duot5-base-msmarco", "sha256": None},
}


@dataclass
class ServiceConfig:
    collection: str = ""
    port: int = 8765
    pool_depth: int = 100
    head_size: int = 10
    embedding_dim: int = 256
    embedding_seed: int = 13
    backend: str = "lite"
    checkpoints: dict = field(default_factory=lambda: dict(DEFAULT_CHECKPOINTS))

    @classmethod
    def from_json(cls, path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        config = cls()
        for key, value in raw.items():
            if not hasattr(config, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(config, key, value)
        return config


def load_texts(path) -> dict[int, str]:
    """Read a `<pid>\\t<text>` collection into memory."""
    texts: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected <pid><TAB><text>")
            pid, text = line.split("\t", 1)
            texts[int(pid)] = text
    return texts
