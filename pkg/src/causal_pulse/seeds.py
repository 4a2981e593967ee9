"""Hierarchical, process-stable seed derivation.

Every analysis task derives its own seed from the run seed and a string
path, so results do not depend on scheduling order and adding analyses
does not perturb existing ones.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: str) -> int:
    """A 63-bit seed determined by the master seed and a key path."""
    digest = hashlib.sha256()
    digest.update(str(int(master)).encode())
    for part in parts:
        digest.update(b"\x1f")
        digest.update(str(part).encode("utf-8"))
    return int.from_bytes(digest.digest()[:8], "big") >> 1
