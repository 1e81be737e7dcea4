"""Deterministic report files: canonical JSON and flat CSV tables.

Byte-for-byte reproducibility is a contract here, so every float is
rounded to 12 significant digits before serialization, non-finite values
become the strings "inf"/"-inf"/"nan" (JSON has no spelling for them),
keys are emitted sorted, and files are written atomically (temp file in
the target directory, then rename).  Timing never goes into a file; the
CLI prints it to stderr instead.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "ARTIFACT_VERSION",
    "fmt_num",
    "canonical",
    "render_json",
    "render_csv",
    "atomic_write_text",
    "atomic_write_bytes",
    "write_json",
    "write_csv",
]

ARTIFACT_VERSION = "0.1.0"


def fmt_num(x: float) -> float | str:
    """Round to 12 significant digits; spell out non-finite values."""
    x = float(x)
    if x != x:
        return "nan"
    if x == float("inf"):
        return "inf"
    if x == float("-inf"):
        return "-inf"
    return float(f"{x:.12g}")


def canonical(obj: Any) -> Any:
    """Reduce report objects to JSON-ready primitives, recursively."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            field.name: canonical(getattr(obj, field.name))
            for field in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return fmt_num(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def render_json(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, (np.floating, float)):
        out = fmt_num(float(v))
        return out if isinstance(out, str) else f"{out:.12g}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return str(v)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, obj: Any) -> None:
    atomic_write_text(path, render_json(obj))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    atomic_write_text(path, render_csv(header, rows))
