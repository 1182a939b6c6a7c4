"""Deterministic JSON and CSV writers.

Reports must be byte-identical across repeated runs and thread counts,
so floats are always formatted with %.17g, keys are sorted, newlines are
LF, and nothing time- or host-dependent is ever written.
"""

from __future__ import annotations

import json
import math

import numpy as np


def _format_float(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} in report")
    if x == 0.0:
        x = 0.0  # normalize -0.0
    return "%.17g" % x


def _coerce(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.complexfloating,)):
        return complex(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _dump(obj, indent):
    obj = _coerce(obj)
    pad = "  " * indent
    pad1 = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, complex):
        return _dump({"im": obj.imag, "re": obj.real}, indent)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(pad1 + _dump(v, indent + 1) for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            if not isinstance(k, str):
                raise TypeError(f"JSON object keys must be strings, got {k!r}")
            items.append(pad1 + json.dumps(k) + ": " + _dump(obj[k], indent + 1))
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return _dump(obj, 0) + "\n"


def dump_json(obj, path):
    text = dumps(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def format_cell(v):
    v = _coerce(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")
