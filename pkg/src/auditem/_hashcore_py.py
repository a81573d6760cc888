"""Pure-Python canonical hashing kernels.

Canonical framing: cells are UTF-8 encoded and joined with the unit
separator 0x1F; every row is terminated with the record separator 0x1E.
A full-grid serialization is prefixed with a header consisting of the
decimal row count and the column names, joined with 0x1F and terminated
with 0x1E.  The framing makes cell and row boundaries unambiguous, so
"ab"+"c" and "a"+"bc" never collide.

The compiled twin of this module is ``auditem._hashcore``; both expose
the same functions and must produce bit-identical digests.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

IMPL = "python"

_US = b"\x1f"
_RS = b"\x1e"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def grid_header(cols: Sequence[str], n_rows: int) -> bytes:
    """Header bytes for a grid serialization: row count plus column list."""
    parts = [str(n_rows).encode("ascii")]
    parts.extend(c.encode("utf-8") for c in cols)
    return _US.join(parts) + _RS


def row_bytes(cells: Sequence[str]) -> bytes:
    return _US.join(c.encode("utf-8") for c in cells) + _RS


def subset_digest(
    cols: Sequence[str],
    rows: Sequence[Sequence[str]],
    include: Sequence[int],
) -> str:
    """SHA-256 over the grid restricted to the ``include`` column indices."""
    h = hashlib.sha256()
    h.update(grid_header([cols[i] for i in include], len(rows)))
    for row in rows:
        h.update(_US.join(row[i].encode("utf-8") for i in include) + _RS)
    return h.hexdigest()


def column_digest(rows: Sequence[Sequence[str]], col_index: int) -> str:
    """SHA-256 over one column's cells top-to-bottom, each cell 0x1E-terminated."""
    h = hashlib.sha256()
    for row in rows:
        h.update(row[col_index].encode("utf-8"))
        h.update(_RS)
    return h.hexdigest()


def row_digest(cells: Sequence[str]) -> str:
    return hashlib.sha256(row_bytes(cells)).hexdigest()


def column_digests(rows: Sequence[Sequence[str]], n_cols: int) -> list[str]:
    """Digests of all columns in a single pass over the rows."""
    hs = [hashlib.sha256() for _ in range(n_cols)]
    for row in rows:
        for j in range(n_cols):
            h = hs[j]
            h.update(row[j].encode("utf-8"))
            h.update(_RS)
    return [h.hexdigest() for h in hs]


def row_digests(rows: Sequence[Sequence[str]]) -> list[str]:
    return [row_digest(row) for row in rows]
