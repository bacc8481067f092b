"""Seed splitting.

Every stochastic decision derives its own ``random.Random`` from the run seed
plus a path of labels, so work can be reordered or parallelised without
changing any output.  The split is ``sha256("seed/label1/label2/...")``
truncated to 63 bits.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *labels: object) -> int:
    key = "/".join([str(seed), *(str(label) for label in labels)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def derive_rng(seed: int, *labels: object) -> random.Random:
    return random.Random(derive_seed(seed, *labels))
