from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import replace
from collections.abc import Callable, Mapping, Sequence
from typing import Any

from ..errors import StructuredOutputError, TransientProviderError
from .ledger import CostLedger, Pricing
from .providers import ImageLoader, Provider
from .types import ChatMessage, ChatRequest, ChatResponse

logger = logging.getLogger(__name__)

DEFAULT_BACKOFF = (0.5, 1.0, 2.0)

# value kinds a schema descriptor may name; a one-element list means "list of that kind"
SchemaKind = type | list
Schema = Mapping[str, SchemaKind]
Validator = Callable[[dict[str, Any]], str | None]


def extract_json_object(text: str) -> dict[str, Any] | None:
    """Return the first decodable JSON object embedded in ``text``."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def _kind_ok(value: Any, kind: SchemaKind) -> bool:
    if isinstance(kind, list):
        return isinstance(value, list) and all(_kind_ok(v, kind[0]) for v in value)
    if kind is bool:
        return isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, kind)


def _kind_name(kind: SchemaKind) -> str:
    if isinstance(kind, list):
        return f"list of {_kind_name(kind[0])}"
    return {bool: "boolean", int: "integer", float: "number", str: "string",
            dict: "object"}.get(kind, kind.__name__)


def check_schema(obj: dict[str, Any], schema: Schema) -> str | None:
    problems = []
    for key, kind in schema.items():
        if key not in obj:
            problems.append(f"missing key {key!r}")
        elif not _kind_ok(obj[key], kind):
            problems.append(f"key {key!r} must be a {_kind_name(kind)}")
    return "; ".join(problems) or None


def describe_schema(schema: Schema) -> str:
    return ", ".join(f'"{key}": {_kind_name(kind)}' for key, kind in schema.items())


class Gateway:
    """Single entry point for every model call in the pipeline.

    Routes each request to a provider by its stage tag, bounds in-flight
    requests with a semaphore, retries transient failures with backoff and
    records usage per tag.  ``temperatures`` overrides the per-stage defaults
    baked into requests, keyed by exact tag.
    """

    def __init__(
        self,
        providers: Provider | Mapping[str, Provider],
        routes: Mapping[str, str] | None = None,
        *,
        max_concurrency: int = 8,
        max_attempts: int = 3,
        backoff: Sequence[float] = DEFAULT_BACKOFF,
        json_retries: int = 2,
        image_root: str | os.PathLike[str] | None = None,
        pricing: Mapping[str, Pricing] | None = None,
        temperatures: Mapping[str, float] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not isinstance(providers, Mapping):
            providers = {"default": providers}
        if "default" not in providers:
            raise ValueError("providers must include a 'default' entry")
        if max_concurrency < 1 or max_attempts < 1 or json_retries < 0:
            raise ValueError("max_concurrency and max_attempts must be >= 1, json_retries >= 0")
        self.providers = dict(providers)
        self.routes = dict(routes or {})
        for name in self.routes.values():
            if name not in self.providers:
                raise ValueError(f"route targets unknown provider {name!r}")
        self.max_attempts = max_attempts
        self.backoff = tuple(backoff)
        self.json_retries = json_retries
        self.images = ImageLoader(image_root)
        self.pricing = dict(pricing or {})
        self.temperatures = dict(temperatures or {})
        self.ledger = CostLedger()
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def provider_for(self, tag: str) -> tuple[str, Provider]:
        """Most specific route wins: ``a.b.c`` tries ``a.b.c``, ``a.b``, ``a``."""
        parts = tag.split(".")
        for i in range(len(parts), 0, -1):
            name = self.routes.get(".".join(parts[:i]))
            if name:
                return name, self.providers[name]
        return "default", self.providers["default"]

    def complete(self, request: ChatRequest) -> ChatResponse:
        if request.tag in self.temperatures:
            request = replace(request, temperature=self.temperatures[request.tag])
        name, provider = self.provider_for(request.tag)
        last_exc: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                delay = self.backoff[min(attempt - 1, len(self.backoff) - 1)] if self.backoff else 0
                logger.warning("retrying %s after %s (attempt %d/%d, sleeping %.2fs)",
                               request.tag, last_exc, attempt + 1, self.max_attempts, delay)
                self._sleep(delay)
            try:
                with self._slots:
                    response = provider.send(request, self.images)
            except TransientProviderError as exc:
                last_exc = exc
                continue
            except Exception:
                self.ledger.record_failure(request.tag)
                raise
            self.ledger.record(request.tag, response.usage, self.pricing.get(name))
            return response
        self.ledger.record_failure(request.tag)
        assert last_exc is not None
        raise last_exc

    def complete_json(
        self,
        request: ChatRequest,
        schema: Schema,
        validate: Validator | None = None,
        retries: int | None = None,
    ) -> dict[str, Any]:
        """Ask for a JSON object and re-ask with the complaint until it validates.

        ``validate`` may add semantic checks on top of the key/kind schema; it
        returns an error message or None.
        """
        retries = self.json_retries if retries is None else retries
        current = request
        reason = ""
        text = ""
        for _ in range(retries + 1):
            text = self.complete(current).text
            obj = extract_json_object(text)
            if obj is None:
                reason = "no JSON object found in reply"
            else:
                reason = check_schema(obj, schema) or (validate(obj) if validate else None) or ""
                if not reason:
                    return obj
            current = current.with_messages([
                ChatMessage.text("assistant", text or "(empty)"),
                ChatMessage.text("user", f"Your reply was rejected: {reason}. Reply with only a "
                                         f"JSON object with keys {{{describe_schema(schema)}}}."),
            ])
        raise StructuredOutputError(request.tag, reason, text)

    def ledger_report(self) -> dict[str, Any]:
        return self.ledger.report()

