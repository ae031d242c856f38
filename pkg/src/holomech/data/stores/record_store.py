"""Record store - writes command records as JSON lines and sweep tables as CSV."""

import csv
import json
import math
import os
import sys
from typing import IO, Any, Iterable, Optional

import numpy as np

from holomech.models import CommandRecord


def to_jsonable(value: Any) -> Any:
    """Convert numpy / complex payloads into plain JSON types.

    Complex scalars and arrays become {"re": ..., "im": ...}; non-finite
    floats become null.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": to_jsonable(value.real.tolist()), "im": to_jsonable(value.imag.tolist())}
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_float(value: Optional[float]) -> str:
    """17 significant digits; empty for missing values."""
    if value is None:
        return ""
    return format(float(value), ".17g")


def record_line(record: CommandRecord) -> str:
    """One JSON line; keys sorted so reruns are byte-identical."""
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(to_jsonable(record.model_dump()), sort_keys=True, ensure_ascii=False, allow_nan=False)


class RecordStore:
    """JSON-lines sink for command records (a file, or stdout)."""

    def __init__(self, path: Optional[str] = None, stream: Optional[IO[str]] = None):
        """Initialize store.

        Args:
            path: Output file (truncated on open); None writes to `stream`
            stream: Fallback text stream, stdout by default
        """
        self.path = path
        self.stream = stream
        self.records: list[CommandRecord] = []
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", encoding="utf-8"):
                pass

    def append(self, record: CommandRecord) -> None:
        self.records.append(record)
        line = record_line(record) + "\n"
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
        else:
            out = self.stream or sys.stdout
            out.write(line)
            out.flush()

    def extend(self, records: Iterable[CommandRecord]) -> None:
        for record in records:
            self.append(record)


def load_records(path: str) -> list[dict]:
    """Read back a JSON-lines file."""
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_table(path: str, columns: list[str], rows: list[dict[str, Any]]) -> None:
    """Write sweep rows as CSV; floats with 17 significant digits."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            cells = []
            for column in columns:
                value = row.get(column)
                if isinstance(value, float) or value is None:
                    cells.append(format_float(value))
                else:
                    cells.append(str(value))
            writer.writerow(cells)
