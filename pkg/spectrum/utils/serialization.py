"""
Schema-stamped file helpers. Every emitted JSON/JSONL/CSV artifact carries a
schema version and the hash of the config that produced it.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LAYOUT_SCHEMA = "layout-v1"
TRACE_SCHEMA = "trace-v1"
CHECKPOINT_SCHEMA = "ckpt-v1"
REPORT_SCHEMA = "report-v1"
METRICS_SCHEMA = "metrics-v1"
PLOTS_SCHEMA = "plots-v1"
CONSTELLATION_SCHEMA = "constellation-v1"
SER_CURVE_SCHEMA = "ser-curve-v1"


def to_jsonable(value: Any) -> Any:
    """Convert numpy containers/scalars to plain Python for json.dumps."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "value") and hasattr(value, "name") and isinstance(getattr(value, "value"), str):
        return value.value  # str Enum
    return value


def write_json(path: Path | str, payload: Dict[str, Any], schema: str, config_hash: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema": schema, "config_hash": config_hash}
    body.update(to_jsonable(payload))
    path.write_text(json.dumps(body, indent=2))
    logger.info(f"Wrote {schema} file: {path}")
    return path


def read_json(path: Path | str, schema: str) -> Dict[str, Any]:
    """Read a schema-stamped JSON file; raises ValueError on schema mismatch."""
    data = json.loads(Path(path).read_text())
    found = data.get("schema")
    if found != schema:
        raise ValueError(f"{path}: expected schema {schema!r}, found {found!r}")
    return data


def write_jsonl(path: Path | str, header: Dict[str, Any], records: Iterable[Dict[str, Any]]) -> Path:
    """Write a JSON-lines file whose first line is the header record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write(json.dumps(to_jsonable(header)) + "\n")
        for record in records:
            f.write(json.dumps(to_jsonable(record)) + "\n")
    logger.info(f"Wrote {header.get('schema')} lines: {path}")
    return path


class CsvAppender:
    """Single-writer CSV appender with a comment header for schema and config hash."""

    def __init__(self, path: Path | str, fieldnames: Sequence[str], schema: str, config_hash: Optional[str]):
        self.path = Path(path)
        self.fieldnames = list(fieldnames)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="") as f:
            f.write(f"# schema={schema} config_hash={config_hash}\n")
            csv.DictWriter(f, fieldnames=self.fieldnames).writeheader()

    def append(self, row: Dict[str, Any]) -> None:
        with self.path.open("a", newline="") as f:
            csv.DictWriter(f, fieldnames=self.fieldnames).writerow(
                {k: to_jsonable(row.get(k, "")) for k in self.fieldnames}
            )


def read_csv_rows(path: Path | str) -> List[Dict[str, str]]:
    """Read a CSV written by CsvAppender (comment lines skipped)."""
    with Path(path).open(newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
