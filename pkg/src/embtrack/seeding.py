"""Deterministic seed derivation: every random stage hangs off one master seed."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: int | str) -> int:
    """Stable 63-bit seed derived from a master seed and stage labels.

    The derivation is a SHA-256 of "master/part1/part2/...", so sweeps that
    share a scene index also share its scene-level randomness.
    """
    key = "/".join([str(master), *map(str, parts)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
