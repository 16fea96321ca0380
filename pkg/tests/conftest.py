import threading
from datetime import date

import pytest

from seller_insights.embedding import HashingEmbedder
from seller_insights.registry import load_registry
from seller_insights.store import generate_store


class SteppingClock:
    """Deterministic monotonic clock: each reading advances 1 ms."""

    def __init__(self, start: float = 1000.0, step: float = 0.001):
        self._now = start
        self._step = step
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._now += self._step
            return self._now


@pytest.fixture(scope="session")
def embedder():
    return HashingEmbedder(dimension=256)


@pytest.fixture(scope="session")
def fixture_store():
    return generate_store(seed=11, n_products=6, start=date(2023, 1, 1), end=date(2024, 9, 30))


@pytest.fixture(scope="session")
def fixture_registry(fixture_store):
    return load_registry(fixture_store)


@pytest.fixture(scope="session")
def today():
    return date(2024, 9, 15)


@pytest.fixture(scope="session")
def trained_models(embedder):
    """OOD gate and router trained on the default corpus, shared per session."""
    import numpy as np

    from seller_insights.core import OodConfig, RouteLabel, RouterConfig
    from seller_insights.corpus import LABEL_OOD, LABEL_PRESENTER, generate_corpus
    from seller_insights.ood import train_ood
    from seller_insights.router import train_router

    corpus = generate_corpus(7)
    in_domain = np.asarray([embedder.embed(q.text) for q in corpus if q.label != LABEL_OOD])
    ood_model = train_ood(in_domain, OodConfig(seed=0), embedder.spec)
    examples = [
        (
            embedder.embed(q.text),
            RouteLabel.PRESENTER if q.label == LABEL_PRESENTER else RouteLabel.INSIGHT_GENERATOR,
        )
        for q in corpus
        if q.label != LABEL_OOD
    ]
    router_model = train_router(examples, RouterConfig(seed=0), embedder.spec)
    return ood_model, router_model
