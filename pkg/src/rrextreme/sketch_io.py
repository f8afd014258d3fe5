"""Sketch file format and number formatting shared by the CLI.

A sketch file holds one JSON object per line::

    {"m": 10, "q": 0.25, "privatized": true, "bits": "a40"}

``bits`` is lowercase hex, ``ceil(m/4)`` digits; bit 1 of the universe is
the most significant bit of the first digit and unused trailing bits are
zero.  Floats are written with 17 significant digits so every value
round-trips exactly.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, TextIO

import numpy as np

from rrextreme.rr_mechanism import NoiseParam
from rrextreme.union_cardinality import UnionSketch

__all__ = [
    "SketchFormatError",
    "bits_from_hex",
    "bits_to_hex",
    "dump_json",
    "dumps_sketch",
    "format_number",
    "load_sketches",
    "loads_sketch",
]


class SketchFormatError(ValueError):
    pass


def bits_to_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    m = bits.size
    digits = -(-m // 4)
    padded = np.zeros(digits * 4, dtype=np.uint8)
    padded[:m] = bits
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1], dtype=np.uint8)
    return "".join("0123456789abcdef"[v] for v in nibbles)


def bits_from_hex(text: str, m: int) -> np.ndarray:
    digits = -(-m // 4)
    if len(text) != digits:
        raise SketchFormatError(f"expected {digits} hex digits for m={m}, got {len(text)}")
    if any(c not in "0123456789abcdef" for c in text):
        raise SketchFormatError("bits must be lowercase hex")
    values = np.array([int(c, 16) for c in text], dtype=np.uint8)
    bits = ((values[:, None] >> np.array([3, 2, 1, 0], dtype=np.uint8)) & 1).reshape(-1)
    if bits[m:].any():
        raise SketchFormatError("padding bits after position m must be zero")
    return bits[:m].astype(np.uint8)


def format_number(x: float | int) -> str:
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dump_json(obj: Any) -> str:
    """Compact JSON with 17-significant-digit floats; keys keep insertion order."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dump_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_sketch(sk: UnionSketch) -> str:
    return dump_json({
        "m": sk.m,
        "q": None if sk.noise is None else sk.noise.q,
        "privatized": sk.privatized,
        "bits": bits_to_hex(sk.bits),
    })


def loads_sketch(text: str) -> UnionSketch:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SketchFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SketchFormatError("a sketch must be a JSON object")
    missing = {"m", "q", "privatized", "bits"} - obj.keys()
    if missing:
        raise SketchFormatError(f"missing fields: {', '.join(sorted(missing))}")
    m, q, privatized, bits = obj["m"], obj["q"], obj["privatized"], obj["bits"]
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise SketchFormatError(f"m must be a positive integer, got {m!r}")
    if not isinstance(privatized, bool):
        raise SketchFormatError("privatized must be a boolean")
    if not isinstance(bits, str):
        raise SketchFormatError("bits must be a hex string")
    if q is None:
        noise = None
    elif isinstance(q, bool) or not isinstance(q, (int, float)):
        raise SketchFormatError(f"q must be a number or null, got {q!r}")
    else:
        try:
            noise = NoiseParam(float(q))
        except ValueError as exc:
            raise SketchFormatError(str(exc)) from exc
    if privatized and noise is None:
        raise SketchFormatError("privatized sketch has no q")
    return UnionSketch(m, bits_from_hex(bits, m), noise, privatized)


def load_sketches(stream: TextIO | Iterable[str]) -> list[UnionSketch]:
    out = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            out.append(loads_sketch(line))
        except SketchFormatError as exc:
            raise SketchFormatError(f"line {lineno}: {exc}") from exc
    return out
