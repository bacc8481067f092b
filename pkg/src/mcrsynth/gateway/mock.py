"""Deterministic offline provider.

Resolution order for each request:

1. an exact fingerprint match in ``fingerprints``;
2. the next unused entry of the ordered per-tag ``script``;
3. the fallback handler registered for the tag (the built-in simulated
   agents unless overridden);
4. a generic acknowledgement.

Randomness for fallbacks comes from ``seed``, the request fingerprint and how
many times that fingerprint has been seen, so identical request sequences
always produce identical response sequences.
"""

from __future__ import annotations

import json
import random
import threading
import time
from collections import defaultdict, deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..seeding import derive_seed
from .payload import payload_of
from .providers import ImageLoader
from .types import ChatRequest, ChatResponse, Usage


@dataclass(frozen=True)
class MockBehaviour:
    """Rates that drive the built-in simulated agents."""

    triple_accept: float = 0.216
    outfit_compat: float = 0.47
    user_accept: float = 0.3
    supervise_pass: float = 0.92
    review_scores: tuple[tuple[int, int, int], ...] = ((2, 2, 2), (2, 2, 2), (2, 2, 1),
                                                      (2, 1, 2), (2, 1, 1), (1, 1, 1))
    invalid_age_rate: float = 0.05
    prose_wrap_rate: float = 0.15
    rerank_top1_rate: float = 0.7

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MockBehaviour":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "review_scores" in known:
            known["review_scores"] = tuple(tuple(row) for row in known["review_scores"])
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown mock behaviour keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class MockCall:
    request: ChatRequest
    rng: random.Random
    payload: dict[str, Any]
    behaviour: MockBehaviour


Handler = Callable[[MockCall], str]


@dataclass
class MockStats:
    in_flight: int = 0
    max_in_flight: int = 0
    calls: int = 0
    requests: list[ChatRequest] = field(default_factory=list)


class MockProvider:
    provider_id = "mock"

    def __init__(
        self,
        seed: int = 0,
        script: Mapping[str, list[str]] | None = None,
        fingerprints: Mapping[str, str] | None = None,
        fallbacks: Mapping[str, Handler] | None = None,
        behaviour: MockBehaviour | None = None,
        *,
        use_default_agents: bool = True,
        latency: float = 0.0,
        record_requests: bool = True,
    ) -> None:
        self.seed = seed
        self.behaviour = behaviour or MockBehaviour()
        self.fingerprints = dict(fingerprints or {})
        self._script = {tag: deque(items) for tag, items in (script or {}).items()}
        self.handlers: dict[str, Handler] = {}
        if use_default_agents:
            from ..simagents import DEFAULT_HANDLERS

            self.handlers.update(DEFAULT_HANDLERS)
        self.handlers.update(fallbacks or {})
        self.latency = latency
        self.record_requests = record_requests
        self.stats = MockStats()
        self._failures: deque[Exception] = deque()
        self._seen: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    @classmethod
    def from_script_file(cls, path: str | Path, seed: int = 0, **kwargs: Any) -> "MockProvider":
        """Script file: JSON object mapping stage tag to an ordered list of replies."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not all(isinstance(v, list) for v in data.values()):
            raise ValueError(f"{path}: mock script must map tags to lists of strings")
        script = {tag: [r if isinstance(r, str) else json.dumps(r) for r in replies]
                  for tag, replies in data.items()}
        return cls(seed=seed, script=script, **kwargs)

    def fail_next(self, *errors: Exception) -> None:
        """Queue exceptions raised by the next calls (for retry tests)."""
        with self._lock:
            self._failures.extend(errors)

    @property
    def requests(self) -> list[ChatRequest]:
        return self.stats.requests

    def send(self, request: ChatRequest, images: ImageLoader) -> ChatResponse:
        fp = request.fingerprint(images.digest)
        with self._lock:
            self.stats.in_flight += 1
            self.stats.max_in_flight = max(self.stats.max_in_flight, self.stats.in_flight)
            self.stats.calls += 1
            if self.record_requests:
                self.stats.requests.append(request)
            failure = self._failures.popleft() if self._failures else None
            occurrence = self._seen[fp]
            self._seen[fp] += 1
            scripted = None
            if failure is None and fp not in self.fingerprints:
                queue = self._script.get(request.tag)
                if queue:
                    scripted = queue.popleft()
        try:
            if self.latency:
                time.sleep(self.latency)
            if failure is not None:
                raise failure
            text = self.fingerprints.get(fp, scripted)
            if text is None:
                text = self._fallback(request, fp, occurrence)
        finally:
            with self._lock:
                self.stats.in_flight -= 1
        prompt_tokens = sum(len(m.text_content.split()) for m in request.messages)
        return ChatResponse(text=text,
                            usage=Usage(prompt_tokens, len(text.split()), len(request.image_refs())),
                            provider_id=self.provider_id)

    def _fallback(self, request: ChatRequest, fp: str, occurrence: int) -> str:
        rng = random.Random(derive_seed(self.seed, fp, occurrence))
        handler = self.handlers.get(request.tag)
        if handler is None:
            return f"Understood. ({fp[:8]})"
        return handler(MockCall(request, rng, payload_of(request), self.behaviour))
