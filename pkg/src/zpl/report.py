"""Serialization of run results to CSV and JSON.

Every record is a mapping with ``params``, a body (``report`` for sums and
statistics, flat probe fields for probes) and ``meta``.  High-precision
values become decimal strings with floor(target_bits * log10 2) significant
digits; complex values become {"re", "im"} objects (``_re``/``_im`` columns
in CSV).  Keys are sorted in JSON, so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction
from typing import Any, Iterable

from .exact import ExactReal
from .hp import HPComplex, HPReal, decimal_digits, format_decimal

FORMAT_VERSION = 1


def plain(value: Any, digits: int) -> Any:
    """Convert a result tree to JSON-ready data."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, HPComplex):
        return {"re": format_decimal(value.real, digits), "im": format_decimal(value.imag, digits)}
    if isinstance(value, (HPReal, Fraction)):
        return format_decimal(value, digits)
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, complex):
        return {"re": repr(float(value.real)), "im": repr(float(value.imag))}
    if isinstance(value, ExactReal):
        return str(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: plain(getattr(value, f.name), digits) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): plain(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v, digits) for v in value]
    return str(value)


def meta(precision_bits: int, cache_keys: Iterable[str] = (), runtime_ms: int | None = None) -> dict:
    return {
        "cache_keys": sorted(set(cache_keys)),
        "format_version": FORMAT_VERSION,
        "precision_bits": precision_bits,
        "runtime_ms": runtime_ms,
    }


def record(params: dict, body: dict, precision_bits: int, cache_keys=(), runtime_ms=None, body_key="report") -> dict:
    digits = decimal_digits(precision_bits)
    out = {"params": plain(params, digits), "meta": meta(precision_bits, cache_keys, runtime_ms)}
    body = plain(body, digits)
    if body_key is None:
        out.update(body)
    else:
        out[body_key] = body
    return out


def to_json(records: list[dict]) -> str:
    doc = records[0] if len(records) == 1 else records
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _flatten(rec: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in rec.items():
        name = key if not prefix or prefix in ("params", "report", "meta") else f"{prefix}_{key}"
        if isinstance(value, dict) and set(value) == {"re", "im"}:
            flat[f"{name}_re"] = value["re"]
            flat[f"{name}_im"] = value["im"]
        elif isinstance(value, dict):
            flat.update(_flatten(value, key))
        elif isinstance(value, list):
            flat[name] = ";".join("" if v is None else str(v) for v in value)
        elif value is None:
            flat[name] = ""
        elif isinstance(value, bool):
            flat[name] = "true" if value else "false"
        else:
            flat[name] = value
    return flat


def to_csv(records: list[dict], columns: list[str] | None = None) -> str:
    """One row per record; nested params/report/meta fields are flattened.

    ``columns`` fixes the leading columns; any others follow in first-seen order.
    """
    rows = [_flatten(r) for r in records]
    header = list(columns or [])
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([row.get(key, "") for key in header])
    return buf.getvalue()


def render(records: list[dict], fmt: str, columns: list[str] | None = None) -> str:
    if fmt == "json":
        return to_json(records)
    if fmt == "csv":
        return to_csv(records, columns)
    raise ValueError(f"unknown format {fmt!r}")
