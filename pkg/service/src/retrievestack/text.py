"""Tokenization and deterministic text embeddings.

The embedding is a feature-hashing projection of word and character
trigram features with sign hashing, L2-normalized. It is fully
deterministic for a given dimension and seed, which keeps the whole
service reproducible without loading model weights.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket(feature: str, seed: int, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8,
                             salt=seed.to_bytes(8, "little")).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, 1.0 if (value >> 60) & 1 else -1.0


@lru_cache(maxsize=1 << 16)
def _feature_slots(feature: str, seed: int, dim: int) -> tuple[int, float]:
    return _bucket(feature, seed, dim)


def embed(text: str, dim: int = 256, seed: int = 13) -> np.ndarray:
    """Hashed word + trigram vector, unit length (zero vector for no
    features)."""
    vec = np.zeros(dim, dtype=np.float64)
    tokens = tokenize(text)
    for token in tokens:
        slot, sign = _feature_slots("w:" + token, seed, dim)
        vec[slot] += sign
        padded = f"#{token}#"
        for i in range(len(padded) - 2):
            slot, sign = _feature_slots("t:" + padded[i:i + 3], seed, dim)
            vec[slot] += 0.5 * sign
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def overlap(query_tokens: list[str], doc_tokens: list[str]) -> float:
    """Directed token overlap: matched query tokens / distinct query tokens."""
    if not query_tokens:
        return 0.0
    qset = set(query_tokens)
    dset = set(doc_tokens)
    return len(qset & dset) / len(qset)
