"""Text embedders.  Each returns one row per input text."""

from __future__ import annotations

import threading
from collections.abc import Sequence
from typing import Protocol

import numpy as np

from ..evalkit.text import tokenize
from ..seeding import derive_seed

_STOPWORDS = frozenset(
    "a an and are as at be by for from has have i in is it its of on or that the this to was "
    "with you your my me we our".split())


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> Sequence[Sequence[float]]: ...


class HashEmbedder:
    """Reproducible bag-of-words embedding for offline runs.

    Every content token owns a fixed pseudo-random gaussian direction derived
    from ``seed``; a text is the normalized sum of its tokens, so texts that
    share words land close together.
    """

    def __init__(self, dimension: int = 64, seed: int = 0) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            vec = self._cache.get(token)
            if vec is None:
                rng = np.random.default_rng(derive_seed(self.seed, "token", token))
                vec = self._cache[token] = rng.standard_normal(self.dimension)
        return vec

    def embed_one(self, text: str) -> np.ndarray:
        tokens = [t for t in tokenize(text) if t not in _STOPWORDS] or ["<empty>"]
        vec = np.sum([self._token_vector(t) for t in tokens], axis=0)
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension))
        return np.vstack([self.embed_one(t) for t in texts])


class HttpEmbedder:
    """Adapter over an OpenAI-compatible embeddings client, batching requests."""

    def __init__(self, client, batch_size: int = 64) -> None:
        self.client = client
        self.batch_size = batch_size

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        rows: list[list[float]] = []
        for i in range(0, len(texts), self.batch_size):
            rows.extend(self.client.embed(list(texts[i:i + self.batch_size])))
        return rows
