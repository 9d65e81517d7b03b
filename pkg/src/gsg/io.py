"""Deterministic JSON and CSV output: every float printed with 17 significant digits."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = "%.17g" % x
    if s == "-0":
        s = "0"
    return s


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any, indent: int | None = 2, _level: int = 0) -> str:
    """JSON text; ``indent=None`` gives a single line."""
    obj = _plain(obj)
    nl = "" if indent is None else "\n"
    pad = "" if indent is None else " " * (indent * (_level + 1))
    end = "" if indent is None else " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + nl + ("," + (nl or " ")).join(items) + nl + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        vals = [_plain(v) for v in obj]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            return "[" + ", ".join(fmt_float(v) if isinstance(v, float) else str(v) for v in vals) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in vals]
        return "[" + nl + ("," + (nl or " ")).join(items) + nl + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: str | Path, obj: Any):
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


def csv_text(header: list[str], rows, comments: list[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"
