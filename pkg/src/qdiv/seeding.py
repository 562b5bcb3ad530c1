"""Deterministic seed derivation.

Child seeds come from hashing the master seed together with a label path,
so every consumer (optimizer restart i, audit check c trial t, ...) gets an
independent, reproducible stream and adding new consumers never perturbs
existing ones.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit child seed for (master, *parts)."""
    text = repr((int(master),) + tuple(parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
