"""Deterministic text output: 17 significant digits, sentinel strings for non-finite values."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _encode(obj: Any, flags: list) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(float(obj)):
            flags.append(True)
            return '"' + fmt(obj) + '"'
        return fmt(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], flags)
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [f"{_encode(str(k), flags)}: {_encode(v, flags)}" for k, v in obj.items()]
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), flags)
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v, flags) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(record: dict) -> str:
    """JSON text with a leading "ok" flag (false when any value is non-finite)."""
    flags: list = []
    rest = {k: v for k, v in record.items() if k != "ok"}
    body = _encode(rest, flags)
    ok = bool(record.get("ok", True)) and not flags
    head = '{"ok": ' + ("true" if ok else "false")
    return head + (", " + body[1:] if rest else "}") + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_bytes(text.encode("utf-8"))


def csv_text(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"
