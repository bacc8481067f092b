from __future__ import annotations

import json
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, EmptyStore
from .embed import Embedder
from .ingest import Catalog

INDEX_FORMAT = "mcrsynth.vector-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class RankedHit:
    product_id: str
    score: float


def _as_matrix(rows: Sequence[Sequence[float]] | np.ndarray, expected: int | None) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        matrix = rows.astype(float)
    else:
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise DimensionMismatch(f"embedder returned rows of lengths {sorted(lengths)}")
        matrix = np.asarray(rows, dtype=float)
    if matrix.ndim != 2:
        raise DimensionMismatch("embedder output is not a 2-d array")
    if expected is not None and matrix.shape[1] != expected:
        raise DimensionMismatch(f"expected dimension {expected}, got {matrix.shape[1]}")
    return matrix


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero vector")
    return matrix / norms


class VectorStore:
    """Unit-normalized product vectors, rows sorted by product id so that
    equal scores rank in ascending id order."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray | Sequence[Sequence[float]],
                 *, normalized: bool = False) -> None:
        matrix = _as_matrix(vectors, None) if len(ids) else np.zeros((0, 0))
        if len(ids) != matrix.shape[0]:
            raise ValueError("ids and vectors differ in length")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in vector store")
        order = sorted(range(len(ids)), key=lambda i: ids[i])
        self.ids: list[str] = [ids[i] for i in order]
        matrix = matrix[order] if len(ids) else matrix
        self.vectors = matrix if normalized or not len(ids) else normalize_rows(matrix)
        self.dimension = int(self.vectors.shape[1]) if len(ids) else 0
        self._row = {pid: i for i, pid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def vector(self, product_id: str) -> np.ndarray:
        return self.vectors[self._row[product_id]]

    def search_vector(self, query: Sequence[float] | np.ndarray, k: int,
                      exclude: Iterable[str] = ()) -> list[RankedHit]:
        if not self.ids:
            raise EmptyStore("vector store is empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=float).reshape(-1)
        if q.shape[0] != self.dimension:
            raise DimensionMismatch(f"query has dimension {q.shape[0]}, store has {self.dimension}")
        norm = np.linalg.norm(q)
        if norm == 0:
            raise ValueError("query vector is zero")
        scores = np.clip(self.vectors @ (q / norm), -1.0, 1.0)
        banned = set(exclude)
        hits = []
        for i in np.argsort(-scores, kind="stable"):
            pid = self.ids[i]
            if pid in banned:
                continue
            hits.append(RankedHit(pid, float(scores[i])))
            if len(hits) == k:
                break
        return hits

    def save(self, path: str | os.PathLike[str]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "dimension": self.dimension,
                "count": len(self.ids), "ids": self.ids, "vectors": self.vectors.tolist()}
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(blob), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "VectorStore":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        if blob.get("format") != INDEX_FORMAT:
            raise ValueError(f"{path} is not a vector index")
        store = cls(blob["ids"], np.asarray(blob["vectors"], dtype=float).reshape(
            len(blob["ids"]), blob["dimension"]), normalized=True)
        return store


def build_index(catalog: Catalog, embedder: Embedder, *, batch_size: int = 256) -> VectorStore:
    """Embed every product summary into a new store."""
    products = list(catalog)
    missing = [p.product_id for p in products if not p.summary]
    if missing:
        raise ValueError(f"{len(missing)} products have no summary, e.g. {missing[0]}")
    blocks: list[np.ndarray] = []
    dimension = None
    for i in range(0, len(products), batch_size):
        batch = products[i:i + batch_size]
        block = _as_matrix(embedder.embed([p.summary or "" for p in batch]), dimension)
        if block.shape[0] != len(batch):
            raise DimensionMismatch("embedder returned a different number of rows than inputs")
        dimension = block.shape[1]
        blocks.append(block)
    ids = [p.product_id for p in products]
    return VectorStore(ids, np.vstack(blocks) if blocks else np.zeros((0, 0)))


def search(store: VectorStore, query: str, embedder: Embedder, k: int,
           exclude: Iterable[str] = ()) -> list[RankedHit]:
    if not len(store):
        raise EmptyStore("vector store is empty")
    row = _as_matrix(embedder.embed([query]), store.dimension)[0]
    return store.search_vector(row, k, exclude)
