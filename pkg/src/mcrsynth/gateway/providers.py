"""Provider implementations for the gateway: image resolution and the
OpenAI-compatible chat-completions client."""

from __future__ import annotations

import base64
import hashlib
import mimetypes
import os
import threading
from pathlib import Path
from typing import Any, Protocol

import httpx

from ..errors import (AuthError, ImageLoadError, MalformedResponse, ProviderError, RateLimited,
                      TransientProviderError)
from .types import ChatRequest, ChatResponse, Usage

REMOTE_PREFIXES = ("http://", "https://", "data:")


class ImageLoader:
    """Resolves image references.  Relative paths are taken against ``root``;
    URLs and data URIs pass through untouched."""

    def __init__(self, root: str | os.PathLike[str] | None = None) -> None:
        self.root = Path(root) if root is not None else None
        self._digests: dict[str, str] = {}
        self._lock = threading.Lock()

    @staticmethod
    def is_remote(ref: str) -> bool:
        return ref.startswith(REMOTE_PREFIXES)

    def resolve(self, ref: str) -> Path:
        path = Path(ref)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return path

    def load_bytes(self, ref: str) -> bytes:
        try:
            return self.resolve(ref).read_bytes()
        except OSError as exc:
            raise ImageLoadError(f"cannot read image {ref!r}: {exc}") from exc

    def digest(self, ref: str) -> str:
        if self.is_remote(ref):
            return "ref:" + hashlib.sha256(ref.encode("utf-8")).hexdigest()
        with self._lock:
            cached = self._digests.get(ref)
        if cached is None:
            cached = "sha256:" + hashlib.sha256(self.load_bytes(ref)).hexdigest()
            with self._lock:
                self._digests[ref] = cached
        return cached

    def data_url(self, ref: str) -> str:
        if self.is_remote(ref):
            return ref
        mime = mimetypes.guess_type(str(self.resolve(ref)))[0] or "image/png"
        payload = base64.b64encode(self.load_bytes(ref)).decode("ascii")
        return f"data:{mime};base64,{payload}"


class Provider(Protocol):
    provider_id: str

    def send(self, request: ChatRequest, images: ImageLoader) -> ChatResponse: ...


def to_openai_messages(request: ChatRequest, images: ImageLoader) -> list[dict[str, Any]]:
    messages = []
    for msg in request.messages:
        if all(p.kind == "text" for p in msg.parts):
            messages.append({"role": msg.role, "content": msg.text_content})
            continue
        content = []
        for part in msg.parts:
            if part.kind == "text":
                content.append({"type": "text", "text": part.text})
            else:
                content.append({"type": "image_url",
                                "image_url": {"url": images.data_url(part.image_ref or "")}})
        messages.append({"role": msg.role, "content": content})
    return messages


class OpenAICompatProvider:
    """Chat-completions over HTTP against any OpenAI-compatible endpoint.

    The credential is read from the environment variable named by
    ``api_key_env`` at construction time.  Retries are the gateway's job; this
    class only classifies failures.
    """

    def __init__(self, base_url: str, model: str, *, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, client: httpx.Client | None = None,
                 provider_id: str | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.provider_id = provider_id or f"openai:{model}"
        self._api_key = os.environ.get(api_key_env, "")
        self._client = client or httpx.Client(timeout=timeout)

    def payload(self, request: ChatRequest, images: ImageLoader) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": to_openai_messages(request, images),
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        return body

    def send(self, request: ChatRequest, images: ImageLoader) -> ChatResponse:
        if not self._api_key:
            raise AuthError("no API key configured for provider " + self.provider_id)
        body = self.payload(request, images)
        try:
            resp = self._client.post(f"{self.base_url}/chat/completions", json=body,
                                     headers={"Authorization": f"Bearer {self._api_key}"})
        except httpx.TimeoutException as exc:
            raise TransientProviderError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientProviderError(f"transport error: {exc}") from exc

        if resp.status_code in (401, 403):
            raise AuthError(f"HTTP {resp.status_code} from {self.base_url}")
        if resp.status_code == 429:
            raise RateLimited(f"HTTP 429 from {self.base_url}")
        if resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code} from {self.base_url}")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        return self._parse(resp, len(request.image_refs()))

    def _parse(self, resp: httpx.Response, image_count: int) -> ChatResponse:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unparsable provider payload: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponse("message content is not a string")
        return ChatResponse(
            text=text,
            usage=Usage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)),
                        image_count),
            provider_id=self.provider_id,
        )


class OpenAICompatEmbeddingClient:
    """``POST /embeddings`` against an OpenAI-compatible endpoint."""

    def __init__(self, base_url: str, model: str, *, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, client: httpx.Client | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self._api_key = os.environ.get(api_key_env, "")
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not self._api_key:
            raise AuthError("no API key configured for embeddings")
        resp = self._client.post(f"{self.base_url}/embeddings",
                                 json={"model": self.model, "input": texts},
                                 headers={"Authorization": f"Bearer {self._api_key}"})
        if resp.status_code in (401, 403):
            raise AuthError(f"HTTP {resp.status_code} from {self.base_url}")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            rows = sorted(resp.json()["data"], key=lambda row: row["index"])
            return [list(map(float, row["embedding"])) for row in rows]
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"unparsable embedding payload: {exc}") from exc
