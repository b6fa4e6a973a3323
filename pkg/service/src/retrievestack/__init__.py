"""Multi-stage retrieval sidecar: sparse + dense pooling, pointwise and
pairwise reranking, served over a small JSON HTTP protocol."""

from .app import create_app
from .config import ServiceConfig, load_texts
from .engine import Candidate, RetrievalEngine

__version__ = "0.1.0"

__all__ = ["Candidate", "RetrievalEngine", "ServiceConfig", "create_app", "load_texts"]
