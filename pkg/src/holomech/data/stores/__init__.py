"""Output stores for command records."""

from .record_store import RecordStore, load_records, record_line, to_jsonable, write_table

__all__ = [
    "RecordStore",
    "load_records",
    "record_line",
    "to_jsonable",
    "write_table",
]
