"""Newline-delimited JSON artifacts with a one-line schema header.

Every artifact written by the pipeline starts with
``{"__header__": true, "schema": <name>, "version": <int>}``.  Readers accept
files with or without the header so hand-made inputs keep working.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


def header(schema: str) -> dict[str, Any]:
    return {"__header__": True, "schema": schema, "version": SCHEMA_VERSION}


def dumps(record: Any) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=False, separators=(",", ":"))


def write_jsonl(path: str | os.PathLike[str], schema: str, records: Iterable[dict[str, Any]]) -> int:
    """Write atomically (temp file + rename); returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(header(schema)) + "\n")
        for record in records:
            fh.write(dumps(record) + "\n")
            count += 1
    os.replace(tmp, path)
    return count


def iter_jsonl(path: str | os.PathLike[str]) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, parsed)`` for data lines; header and blank lines skipped.

    Lines that fail to parse are yielded as ``(line_number, json.JSONDecodeError)``
    so callers decide whether a bad line is fatal.
    """
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, exc
                continue
            if isinstance(obj, dict) and obj.get("__header__"):
                continue
            yield lineno, obj


def read_jsonl(path: str | os.PathLike[str]) -> list[Any]:
    out = []
    for lineno, obj in iter_jsonl(path):
        if isinstance(obj, json.JSONDecodeError):
            raise ValueError(f"{path}:{lineno}: invalid JSON ({obj.msg})")
        out.append(obj)
    return out


def read_header(path: str | os.PathLike[str]) -> dict[str, Any] | None:
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first:
        return None
    try:
        obj = json.loads(first)
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) and obj.get("__header__") else None
