"""CSV and JSON writers shared by the modules and the CLI."""
from __future__ import annotations

import io
import json
import math
from typing import Any, Sequence

import numpy as np

__all__ = ["format_value", "csv_text", "write_text", "to_jsonable", "dumps"]


def format_value(v) -> str:
    """Locale-independent text: integers as-is, floats with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def csv_text(header: Sequence[str], columns: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    cols = [list(c) if not isinstance(c, np.ndarray) else c for c in columns]
    n = len(cols[0]) if cols else 0
    for c in cols:
        if len(c) != n:
            raise ValueError("CSV columns must have equal length")
    for i in range(n):
        buf.write(",".join(format_value(c[i]) for c in cols) + "\n")
    return buf.getvalue()


def write_text(text: str, path=None) -> str:
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    return text


def to_jsonable(obj: Any):
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return f if math.isfinite(f) else str(f)
    return obj


def dumps(obj: Any, **kw) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, **kw)
