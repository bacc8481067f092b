from __future__ import annotations

import hashlib
import json
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Literal

from ..errors import InvalidRequest

Role = Literal["system", "user", "assistant"]

MAX_TEMPERATURE = 2.0


@dataclass(frozen=True)
class ContentPart:
    kind: Literal["text", "image"]
    text: str | None = None
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "text":
            if self.text is None or self.image_ref is not None:
                raise InvalidRequest("text part must carry text and no image_ref")
        elif self.kind == "image":
            if not self.image_ref or self.text is not None:
                raise InvalidRequest("image part must carry image_ref and no text")
        else:
            raise InvalidRequest(f"unknown content kind {self.kind!r}")

    @classmethod
    def of_text(cls, text: str) -> "ContentPart":
        return cls("text", text=text)

    @classmethod
    def of_image(cls, ref: str) -> "ContentPart":
        return cls("image", image_ref=ref)


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    parts: tuple[ContentPart, ...]

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise InvalidRequest(f"unknown role {self.role!r}")
        if not self.parts:
            raise InvalidRequest("message parts must be non-empty")

    @classmethod
    def text(cls, role: Role, text: str, images: Iterable[str] = ()) -> "ChatMessage":
        parts = [ContentPart.of_text(text)] + [ContentPart.of_image(ref) for ref in images]
        return cls(role, tuple(parts))

    @property
    def text_content(self) -> str:
        return "\n".join(p.text for p in self.parts if p.kind == "text" and p.text)

    @property
    def image_refs(self) -> list[str]:
        return [p.image_ref for p in self.parts if p.kind == "image" and p.image_ref]


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    tag: str
    temperature: float = 0.1
    max_output_tokens: int = 1024
    # forwarded to providers that support it; always part of the mock fingerprint
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.tag or not self.tag.strip():
            raise InvalidRequest("tag must be non-empty")
        if not 0.0 <= self.temperature <= MAX_TEMPERATURE:
            raise InvalidRequest(f"temperature {self.temperature} outside [0, {MAX_TEMPERATURE}]")
        if self.max_output_tokens < 1:
            raise InvalidRequest("max_output_tokens must be positive")
        if not self.messages:
            raise InvalidRequest("request needs at least one message")
        system_positions = [i for i, m in enumerate(self.messages) if m.role == "system"]
        if len(system_positions) > 1 or (system_positions and system_positions[0] != 0):
            raise InvalidRequest("at most one system message, and only in first position")

    def with_messages(self, extra: Iterable[ChatMessage]) -> "ChatRequest":
        return ChatRequest(self.messages + tuple(extra), self.tag, self.temperature,
                           self.max_output_tokens, self.seed)

    def image_refs(self) -> list[str]:
        return [ref for m in self.messages for ref in m.image_refs]

    def fingerprint(self, image_digest: Callable[[str], str] | None = None) -> str:
        """Stable hash of everything that determines a response.

        Images contribute their content digest (or the raw reference when no
        digest function is supplied), never their bytes.
        """
        def part(p: ContentPart) -> list:
            if p.kind == "text":
                return ["t", p.text]
            ref = p.image_ref or ""
            return ["i", image_digest(ref) if image_digest else ref]

        payload = {
            "tag": self.tag,
            "temperature": self.temperature,
            "seed": self.seed,
            "messages": [[m.role, [part(p) for p in m.parts]] for m in self.messages],
        }
        blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    image_count: int = 0

    def __post_init__(self) -> None:
        if min(self.prompt_tokens, self.completion_tokens, self.image_count) < 0:
            raise ValueError("usage counts must be non-negative")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(self.prompt_tokens + other.prompt_tokens,
                     self.completion_tokens + other.completion_tokens,
                     self.image_count + other.image_count)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: Usage = field(default_factory=Usage)
    provider_id: str = ""
