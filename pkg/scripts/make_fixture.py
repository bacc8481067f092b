"""Regenerate the bundled fixture catalog and its images.

    python3 scripts/make_fixture.py

Images are 16x16 solid-color PNGs written with the standard library only.
"""

from __future__ import annotations

import json
import random
import struct
import zlib
from pathlib import Path

from mcrsynth import vocab

ROOT = Path(__file__).resolve().parents[1] / "src" / "mcrsynth" / "data" / "fixture"

RGB = {
    "red": (200, 30, 40), "navy": (20, 30, 90), "black": (10, 10, 10), "white": (245, 245, 245),
    "olive": (110, 120, 40), "beige": (220, 200, 160), "burgundy": (120, 20, 40),
    "emerald": (20, 140, 90), "mustard": (210, 170, 40), "grey": (128, 128, 128),
    "pink": (240, 150, 180), "teal": (20, 130, 130), "camel": (190, 140, 80),
    "ivory": (250, 245, 225), "charcoal": (60, 60, 65), "lavender": (180, 160, 220),
    "coral": (250, 120, 90), "khaki": (190, 180, 130), "cobalt": (30, 70, 200), "rust": (170, 80, 40),
}

FLUFF = [
    "Free shipping on all orders!", "Best seller this season, grab yours before it sells out!",
    "Satisfaction guaranteed or your money back.", "Limited stock, order today!",
    "Our customers love it, five stars!", "Perfect for any occasion, you will adore it!",
]


def png(rgb: tuple[int, int, int], size: int = 16) -> bytes:
    def chunk(kind: bytes, data: bytes) -> bytes:
        body = kind + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    row = b"\x00" + bytes(rgb) * size
    raw = row * size
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def main() -> None:
    rng = random.Random(20240611)
    (ROOT / "images").mkdir(parents=True, exist_ok=True)
    garments = list(vocab.GARMENTS)
    seen = set()
    records = []
    while len(records) < 50:
        garment = garments[len(records) % len(garments)]
        color = rng.choice(vocab.COLORS)
        material = rng.choice(vocab.MATERIALS)
        style = rng.choice(vocab.STYLES)
        pattern = rng.choice(vocab.PATTERNS)
        key = (garment, color, material)
        if key in seen:
            continue
        seen.add(key)
        pid = f"P{len(records) + 1:03d}"
        category, _ = vocab.GARMENTS[garment]
        title = f"{color.title()} {material.title()} {style.title()} {garment.title()}"
        description = (
            f"This {style} {garment} is made from {pattern} {color} {material}. "
            f"{rng.choice(FLUFF)} It pairs easily with the rest of your wardrobe. {rng.choice(FLUFF)}")
        image = f"images/{pid}.png"
        (ROOT / image).write_bytes(png(RGB[color]))
        records.append({"id": pid, "title": title, "description": description, "image": image,
                        "categories": [category, garment.title()]})
    with (ROOT / "catalog.jsonl").open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
