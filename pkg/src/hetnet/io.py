"""CSV/JSON emission and run manifests."""

import csv
import dataclasses
import datetime
import io
import json
import math
import os

__all__ = ["format_value", "emit", "render", "RunManifest", "write_manifest"]


def format_value(value):
    """Text form used in CSV cells: 17 significant digits for floats."""
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value.is_integer() and abs(value) < 1e16:
            return repr(value)
        return f"{value:.17g}"
    return str(value)


def _json_value(value):
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float) or hasattr(value, "dtype"):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return str(value)


def _rows(table):
    if isinstance(table, dict):
        table = [table]
    rows = list(table)
    if not rows:
        raise ValueError("cannot emit an empty table")
    header = list(rows[0])
    for row in rows:
        if list(row) != header:
            raise ValueError("all rows must share the same columns")
    return header, rows


def render(table, fmt):
    """Text of ``table`` (a list of dicts with equal keys) in ``csv`` or ``json``."""
    header, rows = _rows(table)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(row[k]) for k in header])
        return buf.getvalue()
    if fmt == "json":
        payload = [{k: _json_value(row[k]) for k in header} for row in rows]
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(table, fmt, path):
    """Write ``table`` to ``path``; raises ``OSError`` when it cannot be written."""
    text = render(table, fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_json_value(obj), indent=2, allow_nan=False) + "\n")
    return path


@dataclasses.dataclass
class RunManifest:
    command: list
    config_hash: str
    seed: int = None
    version: str = ""
    started: str = ""
    finished: str = ""
    outputs: list = dataclasses.field(default_factory=list)

    @staticmethod
    def now():
        return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def write_manifest(manifest, data_path):
    """Store the manifest next to ``data_path`` as ``<data_path>.manifest.json``."""
    path = os.fspath(data_path) + ".manifest.json"
    return write_json(dataclasses.asdict(manifest), path)
