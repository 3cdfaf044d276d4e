"""Small shared helpers: canonical JSON, stable hashing, half-up rounding."""

from __future__ import annotations

import hashlib
import json
from decimal import ROUND_HALF_UP, Decimal


def _json_default(obj):
    if isinstance(obj, Decimal):
        return str(obj)
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, compact separators, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True, default=_json_default)


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def round_half_up(value: float | Decimal, digits: int = 0) -> float:
    """Round with ties away from zero, avoiding float banker's rounding."""
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(str(value)).quantize(q, rounding=ROUND_HALF_UP))


def derived_seed(*parts) -> int:
    """Stable 64-bit seed from heterogeneous parts (run seed, unit id, day)."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
