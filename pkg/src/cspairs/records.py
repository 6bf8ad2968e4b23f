"""Line-delimited record files with an optional provenance header line."""

import hashlib
import json
from pathlib import Path

from .errors import DataError


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def write_records(path, records, meta=None) -> None:
    lines = []
    if meta is not None:
        lines.append(canonical_json({"_meta": meta}))
    lines.extend(canonical_json(r) for r in records)
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_records(path):
    """Read one JSON object per line; returns (meta, records).

    The header is a first line of the form {"_meta": {...}}; meta is None when
    the file starts with a plain record.
    """
    meta = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid record: {exc}") from exc
            if lineno == 1 and isinstance(obj, dict) and "_meta" in obj:
                meta = obj["_meta"]
            else:
                records.append(obj)
    return meta, records
