import random

import pytest

from retrievestack.config import ServiceConfig
from retrievestack.engine import RetrievalEngine


def synthetic_texts(n=300, seed=1234, vocab_size=400):
    rng = random.Random(seed)
    vocab = [f"word{i}" for i in range(vocab_size)]
    texts = {}
    for pid in range(1, n + 1):
        length = rng.randint(6, 30)
        texts[pid] = " ".join(rng.choice(vocab) for _ in range(length))
    return texts


@pytest.fixture(scope="session")
def texts():
    return synthetic_texts()


@pytest.fixture(scope="session")
def engine(texts):
    return RetrievalEngine(texts)


@pytest.fixture
def config():
    return ServiceConfig()
