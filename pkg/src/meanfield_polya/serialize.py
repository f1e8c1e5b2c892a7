"""Record serialization: CSV and JSON-lines with embedded run metadata.

Every output starts with a metadata line carrying the package version and the
full result-affecting configuration of the run, so any file can be re-executed
from its own header and must reproduce itself byte for byte.  Floats are
rendered with ``repr``, the shortest representation that parses back to the
identical double.
"""

import csv
import io
import json
import math

__all__ = [
    "format_value",
    "serialize_records",
    "parse_serialized",
    "extract_metadata",
]

META_PREFIX = "# "


def format_value(value) -> str:
    """Render a scalar for CSV; floats keep full round-trip precision."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta_line(meta: dict) -> str:
    return META_PREFIX + json.dumps(meta, sort_keys=True, separators=(",", ":"))


def _json_default(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    raise TypeError(f"not JSON serializable: {value!r}")


def serialize_records(records, fmt: str, meta: dict, columns=None) -> str:
    """Serialize an iterable of flat dict records to ``csv`` or ``jsonl`` text.

    CSV output is RFC-4180-style (quoting via the csv module) preceded by one
    ``# {json}`` metadata line; JSONL output starts with a ``{"_meta": ...}``
    object.  Column order is taken from ``columns`` or the first record.
    """
    records = list(records)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(_meta_line(meta) + "\r\n")
        if columns is None:
            columns = list(records[0].keys()) if records else []
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([format_value(rec[c]) for c in columns])
        return buf.getvalue()
    if fmt == "jsonl":
        lines = [json.dumps({"_meta": meta}, sort_keys=True, separators=(",", ":"))]
        for rec in records:
            lines.append(json.dumps(rec, sort_keys=True, default=_json_default))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format: {fmt!r} (expected 'csv' or 'jsonl')")


def _parse_scalar(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_serialized(text: str):
    """Inverse of serialize_records: returns (meta, records)."""
    first, _, rest = text.partition("\n")
    first = first.rstrip("\r")
    if first.startswith(META_PREFIX):
        meta = json.loads(first[len(META_PREFIX):])
        reader = csv.reader(io.StringIO(rest))
        rows = list(reader)
        if not rows:
            return meta, []
        columns = rows[0]
        records = [
            {c: _parse_scalar(v) for c, v in zip(columns, row)} for row in rows[1:] if row
        ]
        return meta, records
    head = json.loads(first)
    if "_meta" not in head:
        raise ValueError("missing metadata line")
    records = [json.loads(line) for line in rest.splitlines() if line]
    return head["_meta"], records


def extract_metadata(text: str) -> dict:
    meta, _ = parse_serialized(text)
    return meta
