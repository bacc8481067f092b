"""Closed clothing vocabulary shared by the fixture catalog and the simulated agents."""

from __future__ import annotations

import re

COLORS = [
    "red", "navy", "black", "white", "olive", "beige", "burgundy", "emerald", "mustard", "grey",
    "pink", "teal", "camel", "ivory", "charcoal", "lavender", "coral", "khaki", "cobalt", "rust",
]
MATERIALS = [
    "cotton", "linen", "wool", "silk", "polyester", "denim", "leather", "cashmere", "modal",
    "nylon", "suede", "satin", "fleece", "chiffon", "velvet", "corduroy",
]
PATTERNS = ["solid", "striped", "floral", "plaid", "polka-dot", "herringbone", "paisley", "checked"]
STYLES = [
    "slim-fit", "relaxed", "cropped", "oversized", "tailored", "a-line", "wrap", "high-waisted",
    "crew-neck", "v-neck", "button-down", "pleated", "quilted", "waterproof", "breathable",
    "stretch", "lightweight", "lined",
]

# garment -> (top-level category, slot used for outfit pairing)
GARMENTS: dict[str, tuple[str, str]] = {
    "shirt": ("Clothing", "top"), "t-shirt": ("Clothing", "top"), "blouse": ("Clothing", "top"),
    "sweater": ("Clothing", "top"), "cardigan": ("Clothing", "top"), "hoodie": ("Clothing", "top"),
    "polo": ("Clothing", "top"), "dress": ("Clothing", "dress"), "skirt": ("Clothing", "bottom"),
    "trousers": ("Clothing", "bottom"), "jeans": ("Clothing", "bottom"),
    "shorts": ("Clothing", "bottom"), "leggings": ("Clothing", "bottom"),
    "chinos": ("Clothing", "bottom"), "blazer": ("Clothing", "outer"),
    "jacket": ("Clothing", "outer"), "coat": ("Clothing", "outer"), "vest": ("Clothing", "outer"),
    "sneakers": ("Shoes", "shoes"), "loafers": ("Shoes", "shoes"), "boots": ("Shoes", "shoes"),
    "sandals": ("Shoes", "shoes"), "heels": ("Shoes", "shoes"), "oxfords": ("Shoes", "shoes"),
    "necklace": ("Jewelry", "accessory"), "earrings": ("Jewelry", "accessory"),
    "bracelet": ("Jewelry", "accessory"), "scarf": ("Jewelry", "accessory"),
    "belt": ("Jewelry", "accessory"), "handbag": ("Jewelry", "accessory"),
    "watch": ("Jewelry", "accessory"), "hat": ("Jewelry", "accessory"),
}

PAIRS_WITH = {
    "top": ["bottom", "shoes", "outer"], "bottom": ["top", "shoes"], "dress": ["shoes", "accessory", "outer"],
    "outer": ["top", "bottom"], "shoes": ["bottom", "dress"], "accessory": ["dress", "top"],
}

_WORD = re.compile(r"[a-z][a-z-]*")


def attributes(text: str) -> dict[str, list[str]]:
    """Vocabulary terms found in ``text``, in order of first appearance."""
    found: dict[str, list[str]] = {"color": [], "material": [], "pattern": [], "style": [], "garment": []}
    tables = (("color", COLORS), ("material", MATERIALS), ("pattern", PATTERNS), ("style", STYLES),
              ("garment", list(GARMENTS)))
    for word in _WORD.findall(text.lower()):
        for kind, table in tables:
            if word in table and word not in found[kind]:
                found[kind].append(word)
    return found


def garment_slot(text: str) -> str | None:
    garments = attributes(text)["garment"]
    return GARMENTS[garments[0]][1] if garments else None


def garments_in_slot(slot: str) -> list[str]:
    return [g for g, (_, s) in GARMENTS.items() if s == slot]
