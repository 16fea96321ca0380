"""Text-to-vector providers.

Every provider returns unit-norm float64 vectors of a fixed dimension, so
downstream models (OOD autoencoder, branch router) see canonical inputs.
The built-in hashing embedder is a pure function of the text, which keeps
training and tests reproducible with no external model. External providers
(subprocess or HTTP) plug in through the same contract and are re-normalized
on the way in.
"""

from __future__ import annotations

import hashlib
import json
import re
import subprocess
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import EmptyText, ProviderUnavailable

DEFAULT_DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class EmbedderSpec:
    name: str
    dimension: int

    def to_dict(self) -> dict:
        return {"name": self.name, "dimension": self.dimension}

    @staticmethod
    def from_dict(d: dict) -> "EmbedderSpec":
        return EmbedderSpec(name=d["name"], dimension=int(d["dimension"]))


class Embedder(Protocol):
    @property
    def spec(self) -> EmbedderSpec: ...

    def embed(self, text: str) -> np.ndarray: ...


def l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b)) / denom


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def word_ngrams(tokens: Sequence[str], max_n: int = 3) -> list[str]:
    grams = []
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            grams.append(" ".join(tokens[i : i + n]))
    return grams


def _hash_gram(gram: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "big"
    )


def ngram_cosine(a: str, b: str) -> float:
    """Cosine over exact word n-gram counts, no bucket collisions.

    This is the infinite-dimension limit of the hashing embedder's inner
    product; short strings like column names stay comparable because no
    unrelated gram can alias into their buckets.
    """
    grams_a = word_ngrams(tokenize(a))
    grams_b = word_ngrams(tokenize(b))
    if not grams_a or not grams_b:
        return 0.0
    counts_a: dict[str, int] = {}
    for g in grams_a:
        counts_a[g] = counts_a.get(g, 0) + 1
    counts_b: dict[str, int] = {}
    for g in grams_b:
        counts_b[g] = counts_b.get(g, 0) + 1
    dot = sum(c * counts_b.get(g, 0) for g, c in counts_a.items())
    if dot == 0:
        return 0.0
    norm_a = sum(c * c for c in counts_a.values()) ** 0.5
    norm_b = sum(c * c for c in counts_b.values()) ** 0.5
    return dot / (norm_a * norm_b)


class HashingEmbedder:
    """Signed feature hashing over word uni/bi/tri-grams.

    Lowercases, tokenizes on non-alphanumerics, hashes each n-gram into one
    of `dimension` buckets with a sign bit, then L2-normalizes. Stateless
    and safe for concurrent calls.
    """

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._spec = EmbedderSpec(name="hashing-v1", dimension=dimension)

    @property
    def spec(self) -> EmbedderSpec:
        return self._spec

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        tokens = tokenize(text)
        # Symbol-only input still embeds deterministically: fall back to the
        # raw stripped text as a single token.
        grams = word_ngrams(tokens) if tokens else [text.strip()]
        d = self._spec.dimension
        vec = np.zeros(d, dtype=np.float64)
        for gram in grams:
            h = _hash_gram(gram)
            bucket = h % d
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # Signed collisions cancelled everything; one deterministic fallback bucket.
            vec[_hash_gram("\x00" + text.strip()) % d] = 1.0
            norm = 1.0
        return vec / norm

    def embed_batch(self, texts: Iterable[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


def embed_batch(embedder: Embedder, texts: Iterable[str]) -> list[np.ndarray]:
    """Pointwise batch embedding; element i equals embed(texts[i])."""
    return [embedder.embed(t) for t in texts]


class MemoizingEmbedder:
    """Size-bounded LRU memo in front of another embedder."""

    def __init__(self, inner: Embedder, capacity: int = 4096):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._inner = inner
        self._capacity = capacity
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    @property
    def spec(self) -> EmbedderSpec:
        return self._inner.spec

    def embed(self, text: str) -> np.ndarray:
        with self._lock:
            hit = self._cache.get(text)
            if hit is not None:
                self._cache.move_to_end(text)
                return hit
        vec = self._inner.embed(text)
        with self._lock:
            self._cache[text] = vec
            if len(self._cache) > self._capacity:
                self._cache.popitem(last=False)
        return vec


class SubprocessEmbedder:
    """Adapter for an external embedder spoken to over line-delimited JSON.

    Protocol: one request per line on stdin, {"text": ...}; one response per
    line on stdout, {"vector": [...]}. Vectors are re-normalized so the
    unit-norm contract holds regardless of the provider.
    """

    def __init__(self, command: list[str], name: str = "subprocess"):
        self._command = list(command)
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise ProviderUnavailable(f"cannot start embedder process: {exc}") from exc
        probe = self._request("dimension probe")
        self._spec = EmbedderSpec(name=name, dimension=len(probe))

    def _request(self, text: str) -> list[float]:
        with self._lock:
            if self._proc.poll() is not None:
                raise ProviderUnavailable("embedder process exited")
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(json.dumps({"text": text}) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        if not line:
            raise ProviderUnavailable("embedder process closed its stdout")
        try:
            return json.loads(line)["vector"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ProviderUnavailable(f"bad embedder response: {line!r}") from exc

    @property
    def spec(self) -> EmbedderSpec:
        return self._spec

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        values = self._request(text)
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self._spec.dimension,):
            raise ProviderUnavailable(
                f"provider returned dimension {vec.shape}, expected {self._spec.dimension}"
            )
        return l2_normalize(vec)

    def close(self) -> None:
        with self._lock:
            if self._proc.poll() is None:
                self._proc.terminate()


class HttpEmbedder:
    """Adapter for an embedding endpoint: POST {"text": ...} -> {"vector": [...]}."""

    def __init__(self, url: str, name: str = "http", timeout_s: float = 10.0):
        import requests

        self._url = url
        self._timeout_s = timeout_s
        self._session = requests.Session()
        probe = self._request("dimension probe")
        self._spec = EmbedderSpec(name=name, dimension=len(probe))

    def _request(self, text: str) -> list[float]:
        import requests

        try:
            resp = self._session.post(
                self._url, json={"text": text}, timeout=self._timeout_s
            )
            resp.raise_for_status()
            return resp.json()["vector"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise ProviderUnavailable(f"embedding endpoint failed: {exc}") from exc

    @property
    def spec(self) -> EmbedderSpec:
        return self._spec

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText("cannot embed empty text")
        vec = np.asarray(self._request(text), dtype=np.float64)
        if vec.shape != (self._spec.dimension,):
            raise ProviderUnavailable(
                f"provider returned dimension {vec.shape}, expected {self._spec.dimension}"
            )
        return l2_normalize(vec)
