"""Structured input block embedded at the end of agent prompts.

Prompts carry their variable inputs as one fenced JSON block so that live
models see readable structure and the offline mock can recover the inputs
without parsing prose.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .types import ChatRequest

_BLOCK = re.compile(r"```json\n(.*?)\n```", re.DOTALL)


def render_payload(data: Any) -> str:
    return "INPUT:\n```json\n" + json.dumps(data, ensure_ascii=False, indent=1, sort_keys=True) + "\n```"


def payload_of(request: ChatRequest) -> dict[str, Any]:
    """Inputs of the first user message (re-ask messages appended later carry none)."""
    for message in request.messages:
        if message.role != "user":
            continue
        blocks = _BLOCK.findall(message.text_content)
        if not blocks:
            return {}
        try:
            data = json.loads(blocks[-1])
        except json.JSONDecodeError:
            return {}
        return data if isinstance(data, dict) else {"value": data}
    return {}
