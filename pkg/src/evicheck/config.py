"""Run configuration: defaults, key=value config files, and CLI overrides.

Temperature is intentionally absent; every completion is issued at 0 and
no setting can change that.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class RunConfig:
    collection: str = ""
    queries: str = ""
    qrels: str = ""
    index_cache: str = ""
    run_log: str = ""
    fixtures: str = ""
    retriever: str = "bm25"        # bm25 | neural (statement retrieval)
    evidence_mode: str = "bm25"    # bm25 | neural | reader | qrel
    base_url: str = ""
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "EVICHECK_API_KEY"
    neural_url: str = ""
    concurrency: int = 1
    rate_limit_per_min: float = 0.0
    retry_limit: int = 3
    max_prompt_chars: int = 12000
    k1: float = 0.82
    b: float = 0.68
    stemming: bool = True
    stopwords: bool = False
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        config = cls()
        apply_config_file(config, path)
        return config


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def apply_config_file(config: RunConfig, path) -> None:
    """Update `config` in place from `key = value` lines; # starts a
    comment, unknown keys are rejected."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(config, f.name)) for f in fields(RunConfig)}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        target = types[key]
        if target is bool:
            lowered = value.lower()
            if lowered in _BOOL_TRUE:
                parsed = True
            elif lowered in _BOOL_FALSE:
                parsed = False
            else:
                raise ValueError(f"{path}:{lineno}: bad boolean {value!r}")
        elif target is int:
            parsed = int(value)
        elif target is float:
            parsed = float(value)
        else:
            parsed = value
        setattr(config, key, parsed)
