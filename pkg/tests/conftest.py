"""Shared fixtures and the acceptance-summary reporter.

The reporter prints one PASS/FAIL line per acceptance criterion at the
end of the run, keyed off the ``test_criterion_N`` naming convention in
tests/test_acceptance.py.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import pytest

from auditem.cas import MemoryStore
from auditem.divt import DivtClient
from auditem.ledger import AuthTable, Ledger
from auditem.warehouse import BatchRegistry, BatchSubset, ColumnSpec, load_batches

# ---------------------------------------------------------------------------
# Sample data: a cable-asset table with five batches.

CABLE_HEADER = ["cable_id", "begindate", "enddate", "length", "EndPoint", "batch"]
CABLE_GDPR = ["EndPoint"]

_CABLE_ROWS = [
    # cable_id, begindate, enddate, length, EndPoint, batch
    ["C-0001", "2016-01-04", "2024-06-30", "120.5", "Alice Janssen", "1"],
    ["C-0002", "2016-02-11", "2025-01-15", "88.0", "Bob de Vries", "1"],
    ["C-0003", "2016-03-20", "9999-12-31", "240.2", "Carol Smit", "1"],
    ["C-0101", "2017-05-02", "9999-12-31", "61.7", "Dirk Bakker", "2"],
    ["C-0102", "2017-06-18", "2023-11-02", "145.9", "Els Visser", "2"],
    ["C-0201", "2017-12-09", "9999-12-31", "310.0", "Frank Mulder", "3"],
    ["C-0202", "2017-12-09", "9999-12-31", "12.4", "Greet Hendriks", "3"],
    ["C-0203", "2017-12-10", "2022-08-19", "77.3", "Hugo Peters", "3"],
    ["C-0301", "2018-04-01", "9999-12-31", "54.1", "Ines Dekker", "4"],
    ["C-0302", "2018-04-02", "9999-12-31", "98.6", "Joris van Dam", "4"],
    ["C-0401", "2019-09-23", "9999-12-31", "183.0", "Karin Smits", "5"],
    ["C-0402", "2019-10-07", "2024-02-29", "29.8", "Lars Koning", "5"],
    ["C-0403", "2019-10-08", "9999-12-31", "66.6", "Mia Brouwer", "5"],
]


@pytest.fixture
def cable_csv(tmp_path: Path) -> Path:
    path = tmp_path / "cables.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CABLE_HEADER)
        writer.writerows(_CABLE_ROWS)
    return path


@pytest.fixture
def cable_registry(cable_csv: Path) -> BatchRegistry:
    registry = BatchRegistry()
    registry.add_all(load_batches(cable_csv, "cables", "batch", CABLE_GDPR))
    return registry


def make_batch(
    rows: list[list[str]],
    gdpr: tuple[str, ...] = (),
    table_id: str = "t",
    batch_id: str = "1",
    col_names: list[str] | None = None,
) -> BatchSubset:
    n = len(rows[0]) if rows else 0
    names = col_names or [f"c{j}" for j in range(n)]
    return BatchSubset(
        table_id=table_id,
        batch_id=batch_id,
        timestamp="2017-12-09T00:00:00Z",
        schema=[ColumnSpec(name, name in gdpr) for name in names],
        rows=rows,
    )


@pytest.fixture
def auth() -> AuthTable:
    table = AuthTable(seed="test-seed")
    table.add_identity("Electron", "alice", "user")
    table.add_identity("Electron", "ida", "auditor", "user")
    table.add_identity("AuditCorp", "eve", "external_auditor")
    table.add_identity("Mallory", "mal", "user")
    table.set_cleanup_client("Electron", "cleaner")
    table.grant_collection("Electron", "AuditCorp")
    return table


@pytest.fixture
def ledger(auth: AuthTable) -> Ledger:
    return Ledger(auth)


@pytest.fixture
def client(ledger: Ledger) -> DivtClient:
    return DivtClient(ledger=ledger, store=MemoryStore())


# ---------------------------------------------------------------------------
# Acceptance criterion reporter.

_CRITERIA = {
    1: "first tamper scenario: single mutated cell found by two-tier verify",
    2: "second scenario: duplicate upload rejected; duplicated rows localized",
    3: "tamper localization exhaustive over single-cell mutations, all levels",
    4: "update contract accepts GDPR-only mutations and rejects all others",
    5: "encrypt/decrypt round trips, bit-flip authentication, store integrity",
    6: "chain mutation detection, transient secrecy, duplicate-create race",
    7: "overhead scales ~10x in batch count (ratio within [7, 13])",
    8: "load harness rates 1-256, success ratios, forced throughput plateau",
}

_results: dict[int, str] = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not match or report.when != "call":
        return
    num = int(match.group(1))
    outcome = "PASS" if report.passed else "FAIL"
    # Keep the worst outcome if a criterion spans several test items.
    if _results.get(num) != "FAIL":
        _results[num] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        outcome = _results.get(num, "NOT RUN")
        terminalreporter.write_line(f"criterion {num}: {outcome} — {_CRITERIA[num]}")
