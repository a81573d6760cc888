"""Identification/verification attributes, verification records, and diffs.

Traceability levels trade storage for localization power:

* level 1 stores per-column hashes,
* level 2 adds per-row hashes,
* level 3 embeds the full cell grid instead of column hashes.

Every level also carries the whole-subset hash ``h_v`` and a hash over
the subset with GDPR-flagged columns excluded (``gdprHash``), which lets
the update contract prove that non-personal data is untouched.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from . import hashing
from .errors import IncomparableError, SchemaError, ValidationError
from .warehouse import BatchSubset

LEVELS = (1, 2, 3)


class Verdict(enum.Enum):
    AUTHENTIC = "Authentic"
    TAMPERED = "Tampered"
    MISSING_EVIDENCE = "MissingEvidence"
    # Not part of the three core outcomes: raised when the off-chain
    # record itself fails authenticated decryption or content addressing.
    CORRUPTED = "Corrupted"


@dataclass(frozen=True)
class IdentificationAttribute:
    """Public keyword set locating a batch's evidence on the ledger."""

    organization: str
    table_id: str
    batch_id: str
    timestamp: str

    def __post_init__(self) -> None:
        for name in ("organization", "table_id", "batch_id", "timestamp"):
            value = getattr(self, name)
            if not value:
                raise ValidationError(f"identification attribute {name} is empty")
            if "|" in value:
                raise ValidationError(f"'|' not allowed in {name}: {value!r}")

    def to_dict(self) -> dict:
        return {
            "Org": self.organization,
            "TableId": self.table_id,
            "BatchId": self.batch_id,
            "Timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IdentificationAttribute":
        return cls(d["Org"], d["TableId"], d["BatchId"], d["Timestamp"])


@dataclass
class VerificationAttribute:
    """Hash bundle proving batch content at one traceability level."""

    h_v: str
    traceability: int
    cols: list[str]
    rows: int
    gdpr: list[str]
    gdpr_hash: str
    col_hash: dict[str, str] | None = None
    row_hash: list[str] | None = None
    data: list[list[str]] | None = None

    def __post_init__(self) -> None:
        if self.traceability not in LEVELS:
            raise ValidationError(f"traceability must be in {LEVELS}")
        if self.traceability in (1, 2):
            if self.col_hash is None or self.data is not None:
                raise ValidationError("levels 1/2 carry colHash and no data")
            if set(self.col_hash) != set(self.cols):
                raise ValidationError("colHash keys must equal cols")
        if self.traceability == 1 and self.row_hash is not None:
            raise ValidationError("level 1 carries no rowHash")
        if self.traceability == 2:
            if self.row_hash is None or len(self.row_hash) != self.rows:
                raise ValidationError("level 2 needs one rowHash per row")
        if self.traceability == 3:
            if self.data is None or self.col_hash is not None or self.row_hash is not None:
                raise ValidationError("level 3 carries data and no colHash/rowHash")
            if len(self.data) != self.rows:
                raise ValidationError("data row count must equal rows")

    def to_dict(self) -> dict:
        d: dict = {
            "h_v": self.h_v,
            "traceability": str(self.traceability),
            "cols": list(self.cols),
            "rows": self.rows,
            "gdpr": list(self.gdpr),
            "gdprHash": self.gdpr_hash,
        }
        if self.col_hash is not None:
            d["colHash"] = dict(self.col_hash)
        if self.row_hash is not None:
            d["rowHash"] = list(self.row_hash)
        if self.data is not None:
            d["data"] = [list(r) for r in self.data]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationAttribute":
        return cls(
            h_v=d["h_v"],
            traceability=int(d["traceability"]),
            cols=list(d["cols"]),
            rows=int(d["rows"]),
            gdpr=list(d["gdpr"]),
            gdpr_hash=d["gdprHash"],
            col_hash=dict(d["colHash"]) if "colHash" in d else None,
            row_hash=list(d["rowHash"]) if "rowHash" in d else None,
            data=[list(r) for r in d["data"]] if "data" in d else None,
        )


@dataclass
class VerificationRecord:
    """Identification plus verification attributes, the off-chain artifact."""

    id: IdentificationAttribute
    v: VerificationAttribute
    description: str

    def canonical_bytes(self) -> bytes:
        doc = {
            "description": self.description,
            "id": self.id.to_dict(),
            "v": self.v.to_dict(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "VerificationRecord":
        doc = json.loads(raw.decode("utf-8"))
        return cls(
            id=IdentificationAttribute.from_dict(doc["id"]),
            v=VerificationAttribute.from_dict(doc["v"]),
            description=doc["description"],
        )


def id_att_gen(batch: BatchSubset, organization: str) -> IdentificationAttribute:
    """Project a batch onto its public identification keywords."""
    return IdentificationAttribute(
        organization=organization,
        table_id=batch.table_id,
        batch_id=batch.batch_id,
        timestamp=batch.timestamp,
    )


def subset_hash(batch: BatchSubset, exclude: frozenset[str] | set[str] = frozenset()) -> str:
    """SHA-256 over the batch grid restricted to non-excluded columns."""
    names = batch.column_names
    unknown = set(exclude) - set(names)
    if unknown:
        raise SchemaError(f"exclude names unknown columns: {sorted(unknown)}")
    include = [i for i, n in enumerate(names) if n not in exclude]
    if not include:
        raise ValidationError("exclude would remove every column")
    return hashing.subset_digest(names, batch.rows, include)


def column_hash(batch: BatchSubset, column: str) -> str:
    return hashing.column_digest(batch.rows, batch.column_index(column))


def row_hash(batch: BatchSubset, row_index: int) -> str:
    if not 0 <= row_index < batch.n_rows:
        raise ValidationError(f"row index {row_index} out of range")
    return hashing.row_digest(batch.rows[row_index])


def vrfc_att_gen(batch: BatchSubset, level: int) -> VerificationAttribute:
    """Compute the verification attribute for a batch at one level."""
    if level not in LEVELS:
        raise ValidationError(f"level must be in {LEVELS}")
    names = batch.column_names
    gdpr = batch.gdpr_columns
    h_v = subset_hash(batch)
    gdpr_hash = subset_hash(batch, set(gdpr)) if gdpr else h_v
    col_hash = None
    rows_h = None
    data = None
    if level in (1, 2):
        digests = hashing.column_digests(batch.rows, len(names))
        col_hash = dict(zip(names, digests))
    if level == 2:
        rows_h = hashing.row_digests(batch.rows)
    if level == 3:
        data = [list(r) for r in batch.rows]
    return VerificationAttribute(
        h_v=h_v,
        traceability=level,
        cols=list(names),
        rows=batch.n_rows,
        gdpr=list(gdpr),
        gdpr_hash=gdpr_hash,
        col_hash=col_hash,
        row_hash=rows_h,
        data=data,
    )


_LEVEL_CONTENTS = {
    1: "subset hash, gdpr-exempt hash, per-column hashes",
    2: "subset hash, gdpr-exempt hash, per-column hashes, per-row hashes",
    3: "subset hash, gdpr-exempt hash, full cell data",
}


def rec_gen(ident: IdentificationAttribute, v: VerificationAttribute) -> VerificationRecord:
    """Bundle attributes into a record with an auto-generated description."""
    mutable = ", ".join(v.gdpr) if v.gdpr else "none"
    description = (
        f"traceability level {v.traceability}; "
        f"attributes: {_LEVEL_CONTENTS[v.traceability]}; "
        f"mutable columns: {mutable}"
    )
    return VerificationRecord(id=ident, v=v, description=description)


@dataclass
class CellChange:
    """A single differing cell, with the reference and current values."""

    row: int
    column: str
    reference_value: str
    current_value: str


@dataclass
class TamperReport:
    """Outcome of comparing a live batch against its anchored attributes."""

    table_id: str = ""
    batch_id: str = ""
    verdict: Verdict = Verdict.AUTHENTIC
    changed_columns: list[str] = field(default_factory=list)
    changed_rows: list[int] = field(default_factory=list)
    changed_cells: list[CellChange] = field(default_factory=list)
    row_count_delta: int = 0
    gdpr_hash_mismatch: bool = False
    notes: str = ""

    @property
    def clean(self) -> bool:
        return (
            not self.changed_columns
            and not self.changed_rows
            and not self.changed_cells
            and self.row_count_delta == 0
            and not self.gdpr_hash_mismatch
        )

    def summary(self) -> str:
        if self.verdict is Verdict.AUTHENTIC:
            return "authentic"
        parts = [self.verdict.value]
        if self.changed_columns:
            parts.append("columns: " + ", ".join(self.changed_columns))
        if self.changed_rows:
            parts.append("rows: " + ", ".join(map(str, self.changed_rows)))
        if self.changed_cells:
            cells = ", ".join(f"({c.row},{c.column})" for c in self.changed_cells)
            parts.append("cells: " + cells)
        if self.row_count_delta:
            parts.append(f"row count delta: {self.row_count_delta:+d}")
        if self.gdpr_hash_mismatch:
            parts.append("gdpr-exempt hash mismatch")
        if self.notes:
            parts.append(self.notes)
        return "; ".join(parts)

    def for_batch(self, table_id: str, batch_id: str) -> "TamperReport":
        return replace(self, table_id=table_id, batch_id=batch_id)


def diff_attributes(
    current: VerificationAttribute, reference: VerificationAttribute
) -> TamperReport:
    """Compare two attributes of the same level and column set.

    ``reference`` is the anchored ground truth; ``current`` is recomputed
    from the live warehouse.  Changed columns come out in schema order,
    changed rows in ascending index order.
    """
    if current.traceability != reference.traceability:
        raise IncomparableError(
            f"levels differ: {current.traceability} vs {reference.traceability}"
        )
    if current.cols != reference.cols:
        raise IncomparableError("column sets differ")

    report = TamperReport()
    report.row_count_delta = current.rows - reference.rows
    report.gdpr_hash_mismatch = current.gdpr_hash != reference.gdpr_hash

    if current.traceability in (1, 2):
        assert current.col_hash is not None and reference.col_hash is not None
        report.changed_columns = [
            c for c in current.cols if current.col_hash[c] != reference.col_hash[c]
        ]
    if current.traceability == 2:
        assert current.row_hash is not None and reference.row_hash is not None
        shared = min(len(current.row_hash), len(reference.row_hash))
        report.changed_rows = [
            i for i in range(shared) if current.row_hash[i] != reference.row_hash[i]
        ]
    if current.traceability == 3:
        assert current.data is not None and reference.data is not None
        shared = min(len(current.data), len(reference.data))
        changed_cols: list[str] = []
        for j, name in enumerate(current.cols):
            for i in range(shared):
                old = reference.data[i][j]
                new = current.data[i][j]
                if old != new:
                    report.changed_cells.append(CellChange(i, name, old, new))
                    if name not in changed_cols:
                        changed_cols.append(name)
                    if i not in report.changed_rows:
                        report.changed_rows.append(i)
        report.changed_columns = [c for c in current.cols if c in changed_cols]
        report.changed_rows.sort()
        report.changed_cells.sort(key=lambda c: (c.row, current.cols.index(c.column)))

    report.verdict = Verdict.AUTHENTIC if report.clean else Verdict.TAMPERED
    return report
