from __future__ import annotations

import json
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .. import prompts as P
from ..errors import SummaryEmpty
from ..gateway import Gateway
from ..records import Product
from .ingest import Catalog

DEFAULT_SUMMARY_CAP = 400

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


def truncate_at_sentence(text: str, cap: int) -> str:
    """Cut ``text`` to at most ``cap`` characters, preferring a sentence end,
    then a word boundary, then a hard cut."""
    text = text.strip()
    if len(text) <= cap:
        return text
    head = text[:cap]
    # scan the full text: with endpos=cap, ``$`` would also match at the cut
    ends = [m.end() for m in _SENTENCE_END.finditer(text) if m.end() <= cap]
    if ends:
        return head[:ends[-1]].strip()
    space = head.rfind(" ")
    return (head[:space] if space > 0 else head).strip()


class SummaryCache:
    """JSON file mapping ``product_id:prompt_hash`` to summary text."""

    def __init__(self, path: str | os.PathLike[str] | None) -> None:
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._data: dict[str, str] = {}
        if self.path and self.path.exists():
            self._data = json.loads(self.path.read_text(encoding="utf-8"))

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value: str) -> None:
        with self._lock:
            self._data[key] = value

    def save(self) -> None:
        if not self.path:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            blob = json.dumps(self._data, ensure_ascii=False, indent=0, sort_keys=True)
        tmp = self.path.with_name(self.path.name + ".tmp")
        tmp.write_text(blob, encoding="utf-8")
        os.replace(tmp, self.path)


def summary_request(product: Product):
    return P.build_request(P.SUMMARIZE, {
        "title": product.title,
        "description": product.description,
        "categories": product.category_path,
    }, images=[product.image_ref])


def summarize(product: Product, gateway: Gateway, *, cap: int = DEFAULT_SUMMARY_CAP,
              cache: SummaryCache | None = None) -> str:
    request = summary_request(product)
    key = f"{product.product_id}:{request.fingerprint()[:16]}"
    text = cache.get(key) if cache else None
    if text is None:
        text = gateway.complete(request).text.strip()
        if not text:
            raise SummaryEmpty(f"empty summary for product {product.product_id}")
        text = truncate_at_sentence(text, cap)
        if cache:
            cache.put(key, text)
    product.summary = text
    return text


def summarize_catalog(catalog: Catalog, gateway: Gateway, *, cap: int = DEFAULT_SUMMARY_CAP,
                      cache: SummaryCache | None = None, workers: int = 4) -> int:
    """Summarize every product lacking a summary; returns how many were produced."""
    todo = [p for p in catalog if not p.summary]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        list(pool.map(lambda p: summarize(p, gateway, cap=cap, cache=cache), todo))
    if cache:
        cache.save()
    return len(todo)
