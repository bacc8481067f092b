"""Product catalog: ingest, summaries, vector index and retrieval."""

from .embed import Embedder, HashEmbedder, HttpEmbedder
from .ingest import Catalog, IngestConfig, IngestReport, ingest, ingest_file
from .rerank import Retriever, rerank
from .store import RankedHit, VectorStore, build_index, search
from .summarize import (DEFAULT_SUMMARY_CAP, SummaryCache, summarize, summarize_catalog,
                        truncate_at_sentence)

__all__ = [
    "Catalog", "DEFAULT_SUMMARY_CAP", "Embedder", "HashEmbedder", "HttpEmbedder", "IngestConfig",
    "IngestReport", "RankedHit", "Retriever", "SummaryCache", "VectorStore", "build_index", "ingest",
    "ingest_file", "rerank", "search", "summarize", "summarize_catalog", "truncate_at_sentence",
]
