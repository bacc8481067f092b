"""Uniform access to chat-completion providers (live HTTP or scripted mock)."""

from .core import Gateway, check_schema, extract_json_object
from .ledger import CostLedger, Pricing
from .mock import MockBehaviour, MockCall, MockProvider
from .payload import payload_of, render_payload
from .providers import ImageLoader, OpenAICompatEmbeddingClient, OpenAICompatProvider
from .types import ChatMessage, ChatRequest, ChatResponse, ContentPart, Usage

__all__ = [
    "ChatMessage", "ChatRequest", "ChatResponse", "ContentPart", "CostLedger", "Gateway",
    "ImageLoader", "MockBehaviour", "MockCall", "MockProvider", "OpenAICompatEmbeddingClient",
    "OpenAICompatProvider", "Pricing", "Usage", "check_schema", "extract_json_object",
    "payload_of", "render_payload",
]
