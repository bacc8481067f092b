from __future__ import annotations

import json
import logging
import random
from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import EmptyCatalog, ParseError
from ..jsonl import read_jsonl, write_jsonl
from ..records import Product

logger = logging.getLogger(__name__)

INCOMPLETE_MULTIMODAL = "incomplete multimodal"
MISSING_ID = "missing id"
MISSING_TITLE = "missing title"
MISSING_DESCRIPTION = "missing description"
NOT_WHITELISTED = "category not whitelisted"
DUPLICATE_ID = "duplicate id"
PARSE_ERROR = "parse error"


@dataclass(frozen=True)
class IngestConfig:
    category_whitelist: tuple[str, ...] = ()
    max_products: int | None = None
    # how to reduce the pool to max_products: "first" keeps input order, "random" is a seeded sample
    sample: str = "first"
    seed: int = 0
    image_root: str | None = None
    check_images: bool = False

    def __post_init__(self) -> None:
        if self.sample not in ("first", "random"):
            raise ValueError("sample must be 'first' or 'random'")
        if self.max_products is not None and self.max_products < 1:
            raise ValueError("max_products must be positive")


@dataclass
class IngestReport:
    seen: int = 0
    accepted: int = 0
    sampled_out: int = 0
    rejections: Counter = field(default_factory=Counter)

    def to_json(self) -> dict[str, Any]:
        return {"seen": self.seen, "accepted": self.accepted, "sampled_out": self.sampled_out,
                "rejections": dict(sorted(self.rejections.items()))}


class Catalog:
    """Ordered, id-unique collection of products."""

    def __init__(self, products: Iterable[Product] = ()) -> None:
        self._products: dict[str, Product] = {}
        for product in products:
            if product.product_id in self._products:
                raise ValueError(f"duplicate product id {product.product_id!r}")
            self._products[product.product_id] = product

    def __len__(self) -> int:
        return len(self._products)

    def __iter__(self) -> Iterator[Product]:
        return iter(self._products.values())

    def __contains__(self, product_id: object) -> bool:
        return product_id in self._products

    def __getitem__(self, product_id: str) -> Product:
        return self._products[product_id]

    def get(self, product_id: str) -> Product | None:
        return self._products.get(product_id)

    def ids(self) -> list[str]:
        return list(self._products)

    def save(self, path: str | Path) -> int:
        return write_jsonl(path, "catalog", (p.to_json() for p in self))

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        return cls(Product.model_validate(row) for row in read_jsonl(path))


def _text(value: Any) -> str:
    return value.strip() if isinstance(value, str) else ""


def parse_record(raw: str | dict[str, Any]) -> dict[str, Any]:
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError("record is not a JSON object")
    return raw


def _rejection(rec: dict[str, Any], config: IngestConfig, seen_ids: set[str]) -> str | None:
    pid = rec.get("id")
    pid = str(pid).strip() if pid is not None else ""
    if not pid:
        return MISSING_ID
    if pid in seen_ids:
        return DUPLICATE_ID
    if not _text(rec.get("title")):
        return MISSING_TITLE
    if not _text(rec.get("description")):
        return MISSING_DESCRIPTION
    image = _text(rec.get("image"))
    if not image:
        return INCOMPLETE_MULTIMODAL
    if config.check_images and not image.startswith(("http://", "https://", "data:")):
        path = Path(image)
        if not path.is_absolute() and config.image_root:
            path = Path(config.image_root) / path
        if not path.is_file():
            return INCOMPLETE_MULTIMODAL
    if config.category_whitelist:
        allowed = {c.lower() for c in config.category_whitelist}
        cats = rec.get("categories") or []
        if not any(isinstance(c, str) and c.lower() in allowed for c in cats):
            return NOT_WHITELISTED
    return None


def ingest(records: Iterable[str | dict[str, Any]],
           config: IngestConfig | None = None) -> tuple[Catalog, IngestReport]:
    """Keep records with complete text and image; tally every rejection by reason.

    Malformed records are skipped and counted under ``parse error``.
    """
    config = config or IngestConfig()
    report = IngestReport()
    kept: list[Product] = []
    seen_ids: set[str] = set()
    for raw in records:
        report.seen += 1
        try:
            rec = parse_record(raw)
        except ParseError as exc:
            logger.debug("skipping record %d: %s", report.seen, exc)
            report.rejections[PARSE_ERROR] += 1
            continue
        reason = _rejection(rec, config, seen_ids)
        if reason:
            report.rejections[reason] += 1
            continue
        pid = str(rec["id"]).strip()
        seen_ids.add(pid)
        cats = [c for c in rec.get("categories") or [] if isinstance(c, str)]
        kept.append(Product(product_id=pid, title=_text(rec["title"]),
                            description=_text(rec["description"]), image_ref=_text(rec["image"]),
                            category_path=cats))
    if config.max_products is not None and len(kept) > config.max_products:
        if config.sample == "random":
            chosen = set(random.Random(config.seed).sample(range(len(kept)), config.max_products))
            reduced = [p for i, p in enumerate(kept) if i in chosen]
        else:
            reduced = kept[:config.max_products]
        report.sampled_out = len(kept) - len(reduced)
        kept = reduced
    if not kept:
        raise EmptyCatalog(f"no record survived ingest ({report.to_json()})")
    report.accepted = len(kept)
    return Catalog(kept), report


def ingest_file(path: str | Path, config: IngestConfig | None = None) -> tuple[Catalog, IngestReport]:
    with Path(path).open(encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    return ingest(lines, config)
