"""CSV ingestion into canonical batch subsets and batch lookup.

A batch subset is the unit of verification: all rows that were added to
a table under the same batch id.  Cells are kept as source text and are
never type-coerced, so downstream hashing is independent of any parser.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .errors import IngestionError, NotFoundError, SchemaError

_RESERVED = ("\x1e", "\x1f", "\n")


@dataclass(frozen=True)
class ColumnSpec:
    """One column of a batch schema.

    ``gdpr_flag`` marks columns holding personal data that may later be
    erased or rewritten under the GDPR update path.
    """

    name: str
    gdpr_flag: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise SchemaError("column name must be non-empty")
        for ch in _RESERVED:
            if ch in self.name:
                raise SchemaError(
                    f"column name {self.name!r} contains a reserved separator byte"
                )


@dataclass
class BatchSubset:
    """One warehouse batch: identity, schema, and a rectangular cell grid."""

    table_id: str
    batch_id: str
    timestamp: str
    schema: list[ColumnSpec]
    rows: list[list[str]]

    def __post_init__(self) -> None:
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column name in schema")
        width = len(self.schema)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise SchemaError(
                    f"row {i} has {len(row)} cells, schema has {width} columns"
                )

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.schema]

    @property
    def gdpr_columns(self) -> list[str]:
        return [c.name for c in self.schema if c.gdpr_flag]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.schema):
            if c.name == name:
                return i
        raise SchemaError(f"unknown column: {name}")

    def copy(self) -> "BatchSubset":
        return BatchSubset(
            table_id=self.table_id,
            batch_id=self.batch_id,
            timestamp=self.timestamp,
            schema=list(self.schema),
            rows=[list(r) for r in self.rows],
        )


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_batches(
    path: str | Path,
    table_id: str,
    batch_column: str,
    gdpr_columns: Iterable[str] = (),
    timestamp_column: str | None = None,
) -> list[BatchSubset]:
    """Group a delimited text file into batch subsets, keyed by ``batch_column``.

    The batch column (and the optional timestamp column) are dropped from
    the resulting schemas; ``gdpr_columns`` are flagged in every schema.
    Batches are returned sorted by batch id.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file, no header row") from None
        raw_rows = [(reader.line_num, row) for row in reader if row]

    if batch_column not in header:
        raise SchemaError(f"batch column {batch_column!r} not in header {header}")
    gdpr_set = set(gdpr_columns)
    unknown = gdpr_set - set(header)
    if unknown:
        raise SchemaError(f"gdpr columns not in header: {sorted(unknown)}")
    if timestamp_column is not None and timestamp_column not in header:
        raise SchemaError(f"timestamp column {timestamp_column!r} not in header")

    batch_idx = header.index(batch_column)
    ts_idx = header.index(timestamp_column) if timestamp_column else None
    drop = {batch_idx} | ({ts_idx} if ts_idx is not None else set())
    keep = [i for i in range(len(header)) if i not in drop]
    schema = [ColumnSpec(header[i], header[i] in gdpr_set) for i in keep]

    if not raw_rows:
        raise IngestionError(f"{path}: no data rows")

    grouped: dict[str, list[list[str]]] = {}
    stamps: dict[str, str] = {}
    for line_num, row in raw_rows:
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: line {line_num} has {len(row)} cells, expected {len(header)}"
            )
        bid = row[batch_idx]
        grouped.setdefault(bid, []).append([row[i] for i in keep])
        if ts_idx is not None and bid not in stamps:
            stamps[bid] = row[ts_idx]

    now = _utc_now_iso()
    return [
        BatchSubset(
            table_id=table_id,
            batch_id=bid,
            timestamp=stamps.get(bid, now),
            schema=list(schema),
            rows=rows,
        )
        for bid, rows in sorted(grouped.items())
    ]


@dataclass
class BatchRegistry:
    """In-memory lookup of loaded batches by (table_id, batch_id)."""

    _batches: dict[tuple[str, str], BatchSubset] = field(default_factory=dict)

    def add(self, batch: BatchSubset) -> None:
        self._batches[(batch.table_id, batch.batch_id)] = batch

    def add_all(self, batches: Iterable[BatchSubset]) -> None:
        for b in batches:
            self.add(b)

    def get(self, table_id: str, batch_id: str) -> BatchSubset:
        try:
            return self._batches[(table_id, batch_id)]
        except KeyError:
            raise NotFoundError(f"no batch ({table_id}, {batch_id})") from None

    def batch_ids(self, table_id: str) -> list[str]:
        return sorted(b for t, b in self._batches if t == table_id)
