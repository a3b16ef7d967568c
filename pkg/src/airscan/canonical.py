"""Canonical JSON serialization shared by evidence digests and policy digests.

The canonical form is plain UTF-8 JSON with lexicographically sorted object
keys, no insignificant whitespace, and floats in Python's shortest
round-trip representation.  Equal values always canonicalize to identical
bytes, so SHA-256 over the canonical form is a stable content digest.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_bytes(value: Any) -> bytes:
    """Serialize ``value`` to canonical JSON bytes.

    NaN and infinities are rejected: a digestable document must round-trip
    through standard JSON parsers.
    """
    text = json.dumps(
        value,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )
    return text.encode("utf-8")


def canonical_sha256(value: Any) -> str:
    """Hex SHA-256 of the canonical JSON form of ``value``."""
    return hashlib.sha256(canonical_bytes(value)).hexdigest()
