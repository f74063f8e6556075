"""CSV and JSON report emission with a fixed column order."""
from __future__ import annotations

import csv
import io
import json
import math
import os

__all__ = ["REPORT_FIELDS", "save_report", "format_report"]

REPORT_FIELDS = (
    "solver", "trial", "seed", "m", "n", "s", "kappa", "kappa_f", "epsilon",
    "d", "T", "q", "final_error", "iterations", "wall_time", "phi", "status", "error",
)


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _normalize(record):
    return {key: _clean(record.get(key)) for key in REPORT_FIELDS}


def format_report(records, fmt="json") -> str:
    """Serialize records; the output depends only on the record contents."""
    rows = [_normalize(r) for r in records]
    if fmt == "json":
        return json.dumps(rows, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}; use csv or json")


def save_report(records, path, fmt=None) -> None:
    """Write ``records`` to ``path``; format defaults from the file extension."""
    if fmt is None:
        fmt = "csv" if os.fspath(path).endswith(".csv") else "json"
    text = format_report(records, fmt)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
