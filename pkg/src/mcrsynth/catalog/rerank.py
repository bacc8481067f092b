from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

from .. import prompts as P
from ..gateway import Gateway
from .embed import Embedder
from .ingest import Catalog
from .store import RankedHit, VectorStore, search

logger = logging.getLogger(__name__)


def rerank(hits: Sequence[RankedHit], interests: str, gateway: Gateway, catalog: Catalog, *,
           m: int | None = None, seed: int | None = None) -> RankedHit:
    """Let the model pick the best of the top ``m`` hits by text and image.

    A reply naming a product outside the candidate set falls back to the
    top-ranked hit.
    """
    if not hits:
        raise ValueError("nothing to rerank")
    candidates = list(hits[:m] if m else hits)
    if len(candidates) == 1:
        return candidates[0]
    products = [catalog[h.product_id] for h in candidates]
    request = P.build_request(P.RERANK, {
        "interests": interests,
        "candidates": [{"product_id": p.product_id, "summary": p.summary or p.title} for p in products],
    }, images=[p.image_ref for p in products], seed=seed)
    reply = gateway.complete_json(request, {"product_id": str})
    chosen = str(reply["product_id"]).strip()
    for hit in candidates:
        if hit.product_id == chosen:
            return hit
    logger.warning("rerank chose %r which is not among the candidates; using top-1", chosen)
    return candidates[0]


@dataclass
class Retriever:
    """Catalog plus its index and embedder, the bundle every search needs."""

    catalog: Catalog
    store: VectorStore
    embedder: Embedder
    rerank_top_m: int | None = None
    stats: dict[str, int] = field(default_factory=lambda: {"searches": 0, "reranks": 0})

    def search(self, query: str, k: int, exclude: Sequence[str] = ()) -> list[RankedHit]:
        self.stats["searches"] += 1
        return search(self.store, query, self.embedder, k, exclude)

    def best(self, query: str, k: int, gateway: Gateway, exclude: Sequence[str] = (),
             seed: int | None = None) -> RankedHit:
        hits = self.search(query, k, exclude)
        self.stats["reranks"] += 1
        return rerank(hits, query, gateway, self.catalog, m=self.rerank_top_m, seed=seed)
