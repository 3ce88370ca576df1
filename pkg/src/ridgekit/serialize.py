"""JSON rendering with exact float round-trips, plus atomic file output.

All machine-readable documents in this package are written through
:func:`to_json_text` so that identical in-memory values always produce
byte-identical files.  Floats are rendered with 17 significant digits,
which is enough for IEEE-754 doubles to re-parse bit-exactly.
"""

from __future__ import annotations

import math
import os


class SchemaError(ValueError):
    """A document is malformed; the message names the offending field."""


def fmt_float(value: float) -> str:
    if not math.isfinite(value):
        raise SchemaError(f"non-finite float {value!r} cannot be serialized")
    return format(float(value), ".17g")


def fmt_float_short(value: float) -> str:
    """10 significant digits, used by the CSV rate-experiment output."""
    if not math.isfinite(value):
        return "nan"
    return format(float(value), ".10g")


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def to_json_text(obj, indent: int = 0) -> str:
    """Render nested dict/list/scalar structures deterministically."""
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return _escape(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if hasattr(obj, "tolist"):  # numpy arrays and scalars
        return to_json_text(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {_escape(str(k))}: {to_json_text(v, indent + 2)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ", ".join(to_json_text(v, indent) for v in obj)
        if len(inner) <= 100:
            return "[" + inner + "]"
        items = [f"{pad}  {to_json_text(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise SchemaError(f"cannot serialize object of type {type(obj).__name__}")


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file and rename, so failures leave no partial file."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def get_field(doc: dict, name: str, kinds, context: str):
    """Fetch a required field, raising a SchemaError that names it."""
    if not isinstance(doc, dict):
        raise SchemaError(f"{context}: expected an object with field '{name}'")
    if name not in doc:
        raise SchemaError(f"{context}: missing field '{name}'")
    value = doc[name]
    if kinds is not None and not isinstance(value, kinds):
        raise SchemaError(f"{context}: field '{name}' has wrong type")
    return value
