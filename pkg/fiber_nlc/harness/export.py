"""Result export to CSV and JSON lines with a metadata sidecar."""

import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from fiber_nlc.core.errors import ConfigurationError
from fiber_nlc.receiver.metrics import MetricsRow

METRICS_COLUMNS = [
    "technique",
    "n_spans",
    "distance_km",
    "launch_power_dbm",
    "ber",
    "snr_db",
    "q_db",
    "delta_q_db",
    "mults_per_symbol",
    "bit_errors",
    "counted_bits",
    "capped",
]
FORMATS = ("csv", "jsonl")

PathLike = Union[str, Path]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_for(path: PathLike, fmt: Optional[str] = None) -> str:
    """Output format from an explicit choice or the file suffix."""
    if fmt is None:
        fmt = "jsonl" if Path(path).suffix.lower() in (".jsonl", ".json") else "csv"
    if fmt not in FORMATS:
        raise ConfigurationError(f"Unsupported output format: {fmt}. Expected one of {list(FORMATS)}")
    return fmt


def write_records(
    records: Iterable[Dict[str, Any]], path: PathLike, columns: Sequence[str], fmt: Optional[str] = None
) -> Path:
    """Write dictionaries with a fixed key order.

    CSV always gets a header, even without records. Floats are written with
    ``repr`` so identical records give identical bytes.
    """
    path = Path(path)
    fmt = format_for(path, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if fmt == "csv":
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for record in records:
                writer.writerow([_cell(record.get(column)) for column in columns])
        else:
            for record in records:
                f.write(json.dumps({column: record.get(column) for column in columns}) + "\n")
    return path


def export_rows(rows: Sequence[MetricsRow], path: PathLike, fmt: Optional[str] = None) -> Path:
    """Write metrics rows in the fixed column order."""
    return write_records((row.model_dump() for row in rows), path, METRICS_COLUMNS, fmt)


def read_jsonl(path: PathLike) -> List[MetricsRow]:
    """Parse metrics rows written by :func:`export_rows` in JSON-lines format."""
    with open(path, encoding="utf-8") as f:
        return [MetricsRow.model_validate(json.loads(line)) for line in f if line.strip()]


def meta_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_meta(path: PathLike, config: Dict[str, Any], extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write the ``<output>.meta.json`` sidecar with timestamp and resolved configuration.

    The timestamp lives only here so the data file stays byte-stable.
    """
    meta = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "output": str(path),
        "config": config,
    }
    if extra:
        meta.update(extra)
    target = meta_path(path)
    with open(target, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    return target
