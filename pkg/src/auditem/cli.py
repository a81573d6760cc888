"""Command-line surface for the three actor roles plus benchmarks.

Every subcommand is a thin adapter over the library; business logic
lives in the other modules.  Output is human text by default and JSON
with ``--json``.  Errors exit nonzero with a single machine-parsable
line: ``error:<ErrorClass>: <message>``.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click

from . import bench as benchmod
from .attributes import Verdict
from .cas import DiskStore, LocationHash, MemoryStore
from .divt import DivtClient
from .errors import AuditemError
from .ledger import AuthTable, Ledger
from .warehouse import BatchRegistry, load_batches

CONFIG_ENV = "AUDITEM_CONFIG"


@dataclasses.dataclass
class CliConfig:
    ledger_path: str = "./auditem-ledger"
    cas_backend: str = "disk"
    cas_path: str = "./auditem-cas"
    identity: str = "Electron:alice"
    config_path: str | None = None
    as_json: bool = False
    auth: AuthTable | None = None

    @property
    def org_user(self) -> tuple[str, str]:
        org, _, user = self.identity.partition(":")
        return org, user


def _read_config(path: str | None) -> dict[str, str]:
    """Simple ``key = value`` config format; '#' starts a comment."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None or not Path(path).exists():
        return {}
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        values[key] = value
    return values


def _default_auth() -> AuthTable:
    auth = AuthTable()
    auth.add_identity("Electron", "alice", "user")
    auth.add_identity("Electron", "ida", "auditor", "user")
    auth.add_identity("AuditCorp", "eve", "external_auditor")
    auth.set_cleanup_client("Electron", "cleaner")
    auth.grant_collection("Electron", "AuditCorp")
    return auth


def _build_config(config_path, identity, as_json) -> CliConfig:
    values = _read_config(config_path)
    cfg = CliConfig(config_path=config_path, as_json=as_json)
    cfg.ledger_path = values.get("ledger.path", cfg.ledger_path)
    cfg.cas_backend = values.get("cas.backend", cfg.cas_backend)
    cfg.cas_path = values.get("cas.path", cfg.cas_path)
    cfg.identity = identity or values.get("identity", cfg.identity)
    effective = config_path or os.environ.get(CONFIG_ENV)
    if effective and Path(effective).exists():
        cfg.auth = AuthTable.load(effective)
        if not cfg.auth.roles:
            cfg.auth = _default_auth()
    else:
        cfg.auth = _default_auth()
    return cfg


def _open_ledger(cfg: CliConfig) -> Ledger:
    path = Path(cfg.ledger_path)
    if (path / "blocks.dat").exists():
        return Ledger.load(path, cfg.auth)
    return Ledger(cfg.auth)


def _open_store(cfg: CliConfig):
    if cfg.cas_backend == "memory":
        return MemoryStore()
    return DiskStore(cfg.cas_path)


def _client(cfg: CliConfig) -> DivtClient:
    return DivtClient(ledger=_open_ledger(cfg), store=_open_store(cfg))


def _identity(cfg: CliConfig):
    org, user = cfg.org_user
    return cfg.auth.identity(org, user)


def _emit(cfg: CliConfig, payload: dict, human: str) -> None:
    if cfg.as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(human)


def _report_dict(report) -> dict:
    return {
        "table_id": report.table_id,
        "batch_id": report.batch_id,
        "verdict": report.verdict.value,
        "changed_columns": report.changed_columns,
        "changed_rows": report.changed_rows,
        "changed_cells": [
            {"row": c.row, "column": c.column,
             "reference": c.reference_value, "current": c.current_value}
            for c in report.changed_cells
        ],
        "row_count_delta": report.row_count_delta,
        "gdpr_hash_mismatch": report.gdpr_hash_mismatch,
        "notes": report.notes,
    }


def _fail(exc: Exception) -> None:
    click.echo(f"error:{type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help=f"Config file (or ${CONFIG_ENV}).")
@click.option("--identity", default=None, help="org:user identity override.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, config_path, identity, as_json):
    """Tamper-evident batch verification against a simulated consortium ledger."""
    ctx.obj = _build_config(config_path, identity, as_json)


def _load_registry(cfg, csv_path, table, batch_column, gdpr_columns) -> BatchRegistry:
    gdpr = [c.strip() for c in gdpr_columns.split(",") if c.strip()] if gdpr_columns else []
    batches = load_batches(csv_path, table, batch_column, gdpr)
    registry = BatchRegistry()
    registry.add_all(batches)
    return registry


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--table", required=True)
@click.option("--batch-column", required=True)
@click.option("--gdpr-columns", default="", help="Comma-separated GDPR column names.")
@click.option("--level", type=click.IntRange(1, 3), default=1)
@click.option("--batch", "batch_id", default=None, help="Upload one batch only.")
@click.pass_obj
def upload(cfg, csv_path, table, batch_column, gdpr_columns, level, batch_id):
    """Anchor batches of a CSV table on the ledger (regular user flow)."""
    try:
        registry = _load_registry(cfg, csv_path, table, batch_column, gdpr_columns)
        client = _client(cfg)
        ident = _identity(cfg)
        ids = [batch_id] if batch_id else registry.batch_ids(table)
        results = []
        for bid in ids:
            res = client.upload(registry.get(table, bid), level, ident)
            results.append({"batch_id": bid, "evidence_key": res.evidence_key,
                            "h_v": res.h_v, "h_l": res.h_l})
        client.ledger.save(cfg.ledger_path)
        _emit(cfg, {"uploaded": results},
              "\n".join(f"uploaded batch {r['batch_id']}: evidence {r['evidence_key']}"
                        for r in results))
    except AuditemError as exc:
        _fail(exc)


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--table", required=True)
@click.option("--batch-column", required=True)
@click.option("--gdpr-columns", default="")
@click.option("--batch", "batch_id", required=True)
@click.option("--deep", is_flag=True, help="Force the deep comparison (Verify II).")
@click.pass_obj
def verify(cfg, csv_path, table, batch_column, gdpr_columns, batch_id, deep):
    """Verify one batch: fast hash check, escalating to a deep diff."""
    try:
        registry = _load_registry(cfg, csv_path, table, batch_column, gdpr_columns)
        client = _client(cfg)
        ident = _identity(cfg)
        batch = registry.get(table, batch_id)
        quick = client.verify1(batch, ident)
        if quick.match and not deep:
            client.ledger.save(cfg.ledger_path)
            _emit(cfg, {"batch_id": batch_id, "verdict": "Authentic",
                        "h_v": quick.h_v},
                  f"batch {batch_id}: Authentic (hash match)")
            return
        report = client.verify2(batch, ident)
        client.ledger.save(cfg.ledger_path)
        _emit(cfg, _report_dict(report),
              f"batch {batch_id}: {report.summary()}")
        if report.verdict is not Verdict.AUTHENTIC:
            sys.exit(2)
    except AuditemError as exc:
        _fail(exc)


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--table", required=True)
@click.option("--batch-column", required=True)
@click.option("--gdpr-columns", default="")
@click.option("--all", "all_batches", is_flag=True)
@click.option("--batch", "batch_ids", multiple=True)
@click.pass_obj
def audit(cfg, csv_path, table, batch_column, gdpr_columns, all_batches, batch_ids):
    """Tiered audit over several batches (internal auditor flow)."""
    try:
        registry = _load_registry(cfg, csv_path, table, batch_column, gdpr_columns)
        client = _client(cfg)
        ident = _identity(cfg)
        ids = registry.batch_ids(table) if all_batches else list(batch_ids)
        reports = client.audit(registry, table, ids, ident)
        client.ledger.save(cfg.ledger_path)
        _emit(cfg, {"reports": [_report_dict(r) for r in reports]},
              "\n".join(f"batch {r.batch_id}: {r.summary()}" for r in reports))
        if any(r.verdict is not Verdict.AUTHENTIC for r in reports):
            sys.exit(2)
    except AuditemError as exc:
        _fail(exc)


@main.command()
@click.option("--key", "evidence_key", required=True)
@click.pass_obj
def cert(cfg, evidence_key):
    """List integrity certificates for an evidence key (external auditor flow)."""
    try:
        client = _client(cfg)
        certs = client.external_audit(evidence_key, _identity(cfg))
        payload = [c.to_dict() for c in certs]
        _emit(cfg, {"certificates": payload},
              "\n".join(f"{c.date} {c.auditor_org}:{c.auditor_user} {c.result}"
                        f" ({c.detail})" for c in certs) or "no certificates")
    except AuditemError as exc:
        _fail(exc)


@main.command("gdpr-delete")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--table", required=True)
@click.option("--batch-column", required=True)
@click.option("--gdpr-columns", required=True)
@click.option("--batch", "batch_id", required=True)
@click.option("--columns", required=True,
              help="Comma-separated GDPR columns to blank out.")
@click.option("--reason", required=True)
@click.pass_obj
def gdpr_delete(cfg, csv_path, table, batch_column, gdpr_columns, batch_id,
                columns, reason):
    """Blank GDPR columns of a batch and update the anchored evidence."""
    try:
        registry = _load_registry(cfg, csv_path, table, batch_column, gdpr_columns)
        client = _client(cfg)
        ident = _identity(cfg)
        batch = registry.get(table, batch_id).copy()
        for name in (c.strip() for c in columns.split(",") if c.strip()):
            j = batch.column_index(name)
            for row in batch.rows:
                row[j] = ""
        receipt = client.gdpr_delete(batch, reason, ident)
        client.ledger.save(cfg.ledger_path)
        _emit(cfg, {"evidence_key": receipt.evidence_key,
                    "new_h_v": receipt.new_h_v, "new_h_l": receipt.new_h_l,
                    "block_height": receipt.block_height},
              f"updated evidence {receipt.evidence_key} at block "
              f"{receipt.block_height}")
    except AuditemError as exc:
        _fail(exc)


# -- ledger subcommands --


@main.group("ledger")
def ledger_group():
    """Ledger inspection."""


@ledger_group.command("verify-chain")
@click.pass_obj
def ledger_verify_chain(cfg):
    try:
        check = _open_ledger(cfg).verify_chain()
        _emit(cfg, {"ok": check.ok, "first_bad_height": check.first_bad_height},
              "chain ok" if check.ok else f"chain broken at height {check.first_bad_height}")
        if not check.ok:
            sys.exit(2)
    except AuditemError as exc:
        _fail(exc)


@ledger_group.command("query-evidence")
@click.option("--key", required=True)
@click.pass_obj
def ledger_query_evidence(cfg, key):
    try:
        ev = _open_ledger(cfg).query_evidence(key)
        _emit(cfg, ev.to_dict(),
              f"{ev.organisation}/{ev.table_name}/{ev.batch_id}: "
              f"h_v={ev.verification_hash} h_l={ev.location_hash} "
              f"level={ev.traceability}")
    except AuditemError as exc:
        _fail(exc)


@ledger_group.command("certs")
@click.argument("key")
@click.pass_obj
def ledger_certs(cfg, key):
    try:
        certs = _open_ledger(cfg).query_certificates(key, _identity(cfg))
        _emit(cfg, {"certificates": [c.to_dict() for c in certs]},
              "\n".join(f"{c.date} {c.result}" for c in certs) or "no certificates")
    except AuditemError as exc:
        _fail(exc)


# -- cas subcommands --


@main.group("cas")
def cas_group():
    """Content store operations."""


@cas_group.command("put")
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
def cas_put(cfg, file):
    try:
        addr = _open_store(cfg).put(Path(file).read_bytes())
        _emit(cfg, {"address": addr.digest}, addr.digest)
    except AuditemError as exc:
        _fail(exc)


@cas_group.command("get")
@click.argument("address")
@click.option("-o", "output", type=click.Path(), required=True)
@click.pass_obj
def cas_get(cfg, address, output):
    try:
        content = _open_store(cfg).get(LocationHash(address))
        Path(output).write_bytes(content)
        _emit(cfg, {"address": address, "size": len(content)},
              f"wrote {len(content)} bytes to {output}")
    except AuditemError as exc:
        _fail(exc)


# -- bench subcommands --


@main.group("bench")
def bench_group():
    """Performance benchmarks."""


@bench_group.command("overhead")
@click.option("--records", type=int, default=1000)
@click.option("--batches", default="1,10", help="Comma-separated batch counts.")
@click.option("--reps", type=int, default=3)
@click.option("--level", type=click.IntRange(1, 3), default=1)
@click.option("--budget", type=float, default=None, help="Wall-clock budget (s).")
@click.option("-o", "output", type=click.Path(), default=None)
@click.pass_obj
def bench_overhead(cfg, records, batches, reps, level, budget, output):
    counts = [int(b) for b in batches.split(",") if b.strip()]
    rows = benchmod.run_overhead(
        benchmod.OverheadConfig(records, counts, reps, level), budget
    )
    if output:
        benchmod.write_overhead_report(rows, output)
    _emit(cfg, {"rows": [dataclasses.asdict(r) for r in rows]},
          "\n".join(f"{r.config} | {r.stage}: {r.mean_s:.4f}s ±{r.sd_s:.4f}"
                    for r in rows))


@bench_group.command("load")
@click.option("--rates", default="1,2,4,8,16,32,64,128,256")
@click.option("--workers", type=int, default=10)
@click.option("--operation", type=click.Choice(["write", "read"]), default="write")
@click.option("--tx-count", type=int, default=None)
@click.option("--commit-delay", type=float, default=0.0,
              help="Artificial per-commit delay in seconds.")
@click.option("-o", "output", type=click.Path(), default=None)
@click.pass_obj
def bench_load(cfg, rates, workers, operation, tx_count, commit_delay, output):
    rate_list = [int(r) for r in rates.split(",") if r.strip()]
    rows = benchmod.run_load(
        benchmod.LoadConfig(rate_list, workers, operation, tx_count), commit_delay
    )
    if output:
        benchmod.write_load_report(rows, output)
    _emit(cfg, {"rows": [dataclasses.asdict(r) for r in rows]},
          "\n".join(f"rate {r.rate}: {r.throughput:.1f} tps, "
                    f"lat {r.lat_min:.4f}/{r.lat_avg:.4f}/{r.lat_max:.4f}s, "
                    f"success {r.success_ratio:.2%}" for r in rows))


@bench_group.command("kernels")
@click.option("--records", type=int, default=20000)
@click.pass_obj
def bench_kernels(cfg, records):
    rows = benchmod.run_kernels(records)
    _emit(cfg, {"rows": [dataclasses.asdict(r) for r in rows]},
          "\n".join(f"{r.backend}: {r.records} records in {r.seconds:.3f}s"
                    for r in rows))


if __name__ == "__main__":
    main()
