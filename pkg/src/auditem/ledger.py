"""Simulated permissioned consortium ledger.

A single serializing queue stands in for the ordering service: all
mutation funnels through :meth:`Ledger.submit` under one lock, blocks
are hash-chained from genesis, and world state lives in a key/value map
with composite owner-index entries.  Private key material is carried in
transient transaction fields and stored in per-organization private
collections, never inside blocks.

Contract semantics (evidence, private keys, certificates, GDPR update)
are faithful; replication, leader election, and networking are not
simulated because they do not affect those semantics.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import struct
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .attributes import VerificationRecord
from .errors import (
    AuditemError,
    AuthorizationError,
    DuplicateKeyError,
    NotFoundError,
    ValidationError,
)

PRIVATE_COLLECTION = "collectionPrivateDetails"

_ROLES = {"user", "auditor", "external_auditor", "cleanup"}


def evidence_key(org: str, table_id: str, batch_id: str) -> str:
    """Deterministic state key for a batch's evidence.

    '|' is banned from the three identity fields, so the joined form
    cannot collide across different identities.
    """
    return hashlib.sha256(f"{org}|{table_id}|{batch_id}".encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Identities and authorization


@dataclass(frozen=True)
class Identity:
    """A signing identity; the secret is an HMAC key registered in the
    authorization table (simplified stand-in for CA-issued certificates)."""

    org: str
    user: str
    secret: bytes

    def sign(self, payload: bytes) -> str:
        return hmac.new(self.secret, payload, hashlib.sha256).hexdigest()


class AuthTable:
    """Static org/user -> role table plus private-collection grants."""

    def __init__(self, seed: str = "auditem-dev-seed") -> None:
        self.seed = seed
        self.roles: dict[tuple[str, str], set[str]] = {}
        self.grants: dict[str, set[str]] = {}
        self.cleanup_client: tuple[str, str] | None = None

    def add_identity(self, org: str, user: str, *roles: str) -> Identity:
        bad = set(roles) - _ROLES
        if bad:
            raise ValidationError(f"unknown roles: {sorted(bad)}")
        self.roles.setdefault((org, user), set()).update(roles)
        return self.identity(org, user)

    def grant_collection(self, owner_org: str, granted_org: str) -> None:
        self.grants.setdefault(owner_org, set()).add(granted_org)

    def set_cleanup_client(self, org: str, user: str) -> None:
        self.cleanup_client = (org, user)
        self.roles.setdefault((org, user), set()).add("cleanup")

    def _secret(self, org: str, user: str) -> bytes:
        return hmac.new(
            self.seed.encode("utf-8"), f"{org}:{user}".encode("utf-8"), hashlib.sha256
        ).digest()

    def identity(self, org: str, user: str) -> Identity:
        if (org, user) not in self.roles:
            raise AuthorizationError(f"unknown identity {org}:{user}")
        return Identity(org, user, self._secret(org, user))

    def has_role(self, org: str, user: str, role: str) -> bool:
        return role in self.roles.get((org, user), set())

    def is_cleanup_client(self, org: str, user: str) -> bool:
        return self.cleanup_client == (org, user)

    def collection_readable(self, owner_org: str, caller_org: str) -> bool:
        return caller_org == owner_org or caller_org in self.grants.get(owner_org, set())

    def verify(self, org: str, user: str, payload: bytes, signature: str) -> bool:
        if (org, user) not in self.roles:
            return False
        expected = hmac.new(self._secret(org, user), payload, hashlib.sha256).hexdigest()
        return hmac.compare_digest(expected, signature)

    # -- config file (simple key/value lines) --

    @classmethod
    def from_text(cls, text: str) -> "AuthTable":
        table = cls()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            key, value = (p.strip() for p in line.split("=", 1))
            if key == "seed":
                table.seed = value
            elif key.startswith("role "):
                org, user = key[len("role "):].strip().split(":", 1)
                roles = [r.strip() for r in value.split(",") if r.strip()]
                table.add_identity(org, user, *roles)
            elif key.startswith("grant "):
                owner = key[len("grant "):].strip()
                for org in value.split(","):
                    table.grant_collection(owner, org.strip())
            elif key == "cleanup":
                org, user = value.split(":", 1)
                table.set_cleanup_client(org.strip(), user.strip())
        return table

    @classmethod
    def load(cls, path: str | Path) -> "AuthTable":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# On-ledger value types


@dataclass
class Evidence:
    """On-chain binding of a batch identity to its hashes.

    The location hash is stored on-chain alongside the verification hash
    so Verify II can fetch the off-chain record.
    """

    organisation: str
    table_name: str
    batch_id: str
    verification_hash: str
    location_hash: str
    traceability: int

    def key(self) -> str:
        return evidence_key(self.organisation, self.table_name, self.batch_id)

    def to_dict(self) -> dict:
        return {
            "Organisation": self.organisation,
            "Table_name": self.table_name,
            "Batch_ID": self.batch_id,
            "Verification_Hash": self.verification_hash,
            "Location_Hash": self.location_hash,
            "Traceability": self.traceability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Evidence":
        return cls(
            organisation=d["Organisation"],
            table_name=d["Table_name"],
            batch_id=d["Batch_ID"],
            verification_hash=d["Verification_Hash"],
            location_hash=d["Location_Hash"],
            traceability=int(d["Traceability"]),
        )


@dataclass
class Certificate:
    evidence_key: str
    date: str
    auditor_org: str
    auditor_user: str
    result: str  # "Authentic" | "Tampered"
    detail: str

    def to_dict(self) -> dict:
        return {
            "EvidenceKey": self.evidence_key,
            "Date": self.date,
            "AuditorOrg": self.auditor_org,
            "AuditorUser": self.auditor_user,
            "Result": self.result,
            "Detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(
            d["EvidenceKey"], d["Date"], d["AuditorOrg"], d["AuditorUser"],
            d["Result"], d["Detail"],
        )


@dataclass
class UpdateLog:
    evidence_key: str
    old_h_v: str
    new_h_v: str
    old_h_l: str
    new_h_l: str
    org: str
    user: str
    reason: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "EvidenceKey": self.evidence_key,
            "OldVerificationHash": self.old_h_v,
            "NewVerificationHash": self.new_h_v,
            "OldLocationHash": self.old_h_l,
            "NewLocationHash": self.new_h_l,
            "Org": self.org,
            "User": self.user,
            "Reason": self.reason,
            "Timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UpdateLog":
        return cls(
            d["EvidenceKey"], d["OldVerificationHash"], d["NewVerificationHash"],
            d["OldLocationHash"], d["NewLocationHash"], d["Org"], d["User"],
            d["Reason"], d["Timestamp"],
        )


# ---------------------------------------------------------------------------
# Transactions and blocks


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class Transaction:
    tx_id: str
    contract: str  # Evidence | PrivateKeys | Certificates | Update
    function: str
    args: list[str]
    org: str
    user: str
    timestamp: str
    signature: str = ""
    # Never serialized into blocks; carries key material and records.
    transient: dict[str, bytes] | None = None

    @classmethod
    def create(
        cls,
        identity: Identity,
        contract: str,
        function: str,
        args: list[str],
        transient: dict[str, bytes] | None = None,
    ) -> "Transaction":
        tx = cls(
            tx_id=uuid.uuid4().hex,
            contract=contract,
            function=function,
            args=list(args),
            org=identity.org,
            user=identity.user,
            timestamp=_utc_now(),
            transient=transient,
        )
        tx.signature = identity.sign(tx.signing_payload())
        return tx

    def signing_payload(self) -> bytes:
        # The transient map is covered by digest only, so the signature
        # binds it without the payload ever containing secret bytes.
        transient_digest = ""
        if self.transient:
            h = hashlib.sha256()
            for key in sorted(self.transient):
                h.update(key.encode("utf-8"))
                h.update(b"\x00")
                h.update(self.transient[key])
                h.update(b"\x00")
            transient_digest = h.hexdigest()
        doc = {
            "tx_id": self.tx_id,
            "contract": self.contract,
            "function": self.function,
            "args": self.args,
            "org": self.org,
            "user": self.user,
            "timestamp": self.timestamp,
            "transient": transient_digest,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def to_block_dict(self, status: str, error: str = "") -> dict:
        """Block representation with the transient map stripped."""
        return {
            "tx_id": self.tx_id,
            "contract": self.contract,
            "function": self.function,
            "args": self.args,
            "org": self.org,
            "user": self.user,
            "timestamp": self.timestamp,
            "signature": self.signature,
            "status": status,
            "error": error,
        }


@dataclass
class Block:
    height: int
    prev_hash: str
    txs: list[dict]
    state_root: str
    block_hash: str = ""

    def compute_hash(self) -> str:
        tx_digests = [
            hashlib.sha256(
                json.dumps(t, sort_keys=True, separators=(",", ":")).encode()
            ).hexdigest()
            for t in self.txs
        ]
        doc = {
            "height": self.height,
            "prev_hash": self.prev_hash,
            "tx_digests": tx_digests,
            "state_root": self.state_root,
        }
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash,
            "txs": self.txs,
            "state_root": self.state_root,
            "block_hash": self.block_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            height=d["height"],
            prev_hash=d["prev_hash"],
            txs=list(d["txs"]),
            state_root=d["state_root"],
            block_hash=d["block_hash"],
        )


@dataclass
class CommitReceipt:
    block_height: int
    status: str  # "ok" | "failed" | "rejected"
    latency_s: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class ChainCheck:
    ok: bool
    first_bad_height: int | None = None


class _ContractFailure(AuditemError):
    """Internal: carries the public error to record in the block."""

    def __init__(self, wrapped: AuditemError):
        super().__init__(str(wrapped))
        self.wrapped = wrapped


# ---------------------------------------------------------------------------
# The ledger


class Ledger:
    """World state + hash-chained blocks behind a serializing commit lock.

    ``commit_delay_s`` adds an artificial per-commit delay inside the
    ordering lock, used by the load benchmark to force a throughput
    plateau.
    """

    def __init__(self, auth: AuthTable, commit_delay_s: float = 0.0) -> None:
        self.auth = auth
        self.commit_delay_s = commit_delay_s
        self._lock = threading.Lock()
        self._next_commit_slot = 0.0
        self._state: dict[str, str] = {}
        # (collection, key) -> {"owner": org, "secretKey": hex, "nonce": hex}
        self._private: dict[tuple[str, str], dict] = {}
        genesis = Block(height=0, prev_hash="0" * 64, txs=[], state_root=self._state_root())
        genesis.block_hash = genesis.compute_hash()
        self._blocks: list[Block] = [genesis]

    # -- chain plumbing --

    @property
    def height(self) -> int:
        return self._blocks[-1].height

    def blocks(self) -> list[Block]:
        return list(self._blocks)

    def _state_root(self) -> str:
        doc = json.dumps(sorted(self._state.items()), separators=(",", ":"))
        return hashlib.sha256(doc.encode("utf-8")).hexdigest()

    def verify_chain(self) -> ChainCheck:
        prev_hash = "0" * 64
        for block in self._blocks:
            if block.prev_hash != prev_hash or block.compute_hash() != block.block_hash:
                return ChainCheck(False, block.height)
            prev_hash = block.block_hash
        return ChainCheck(True, None)

    # -- ordering / commit --

    def submit(self, tx: Transaction) -> CommitReceipt:
        start = time.monotonic()
        if not self.auth.verify(tx.org, tx.user, tx.signing_payload(), tx.signature):
            # Rejected pre-ordering: never reaches a block.
            return CommitReceipt(self.height, "rejected", time.monotonic() - start,
                                 "invalid signature")
        with self._lock:
            status, error = "ok", ""
            snapshot = dict(self._state)
            try:
                self._execute(tx)
            except _ContractFailure as exc:
                self._state = snapshot
                status, error = "failed", str(exc)
            block = Block(
                height=self.height + 1,
                prev_hash=self._blocks[-1].block_hash,
                txs=[tx.to_block_dict(status, error)],
                state_root=self._state_root(),
            )
            block.block_hash = block.compute_hash()
            self._blocks.append(block)
            height = block.height
            if self.commit_delay_s:
                # Each commit reserves the next slot in a paced stream, so
                # confirmations space out at the configured interval (the
                # plateau) without serializing callers on a sleeping lock.
                now = time.monotonic()
                slot = max(self._next_commit_slot, now) + self.commit_delay_s
                self._next_commit_slot = slot
            else:
                slot = None
        if slot is not None:
            remaining = slot - time.monotonic()
            if remaining > 0:
                time.sleep(remaining)
        return CommitReceipt(height, status, time.monotonic() - start, error)

    def _execute(self, tx: Transaction) -> None:
        try:
            handler = {
                ("Evidence", "createEvidence"): self._create_evidence,
                ("PrivateKeys", "createPrivateKey"): self._create_private_key,
                ("Certificates", "createCertificate"): self._create_certificate,
                ("Update", "updateEvidence"): self._update_evidence,
            }[(tx.contract, tx.function)]
        except KeyError:
            raise _ContractFailure(
                ValidationError(f"unknown contract function {tx.contract}.{tx.function}")
            ) from None
        try:
            handler(tx)
        except AuditemError as exc:
            raise _ContractFailure(exc) from exc

    # -- contract: Evidence --

    def _create_evidence(self, tx: Transaction) -> None:
        key = tx.args[0]
        ev = Evidence.from_dict(json.loads(tx.args[1]))
        if key != ev.key():
            raise ValidationError("evidence key does not match evidence identity")
        if tx.org != ev.organisation:
            raise AuthorizationError(
                f"{tx.org} may not create evidence owned by {ev.organisation}"
            )
        if key in self._state:
            raise DuplicateKeyError(f"the batch already exists: {key}")
        self._state[key] = json.dumps(ev.to_dict(), sort_keys=True)
        self._state[self._composite_key(ev.organisation, key)] = "\x00"

    @staticmethod
    def _composite_key(org: str, key: str) -> str:
        return f"owner_key\x00{org}\x00{key}"

    def query_evidence(self, key: str) -> Evidence:
        """Read-only: appends no block and changes no state."""
        try:
            return Evidence.from_dict(json.loads(self._state[key]))
        except KeyError:
            raise NotFoundError(f"no evidence at {key}") from None

    def query_by_owner(self, org: str) -> list[str]:
        prefix = f"owner_key\x00{org}\x00"
        return sorted(k[len(prefix):] for k in self._state if k.startswith(prefix))

    # -- contract: PrivateKeys --

    def _create_private_key(self, tx: Transaction) -> None:
        if not tx.transient or "keys" not in tx.transient:
            raise ValidationError("transient field 'keys' is required")
        try:
            inp = json.loads(tx.transient["keys"].decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            raise ValidationError("transient 'keys' is not valid JSON") from None
        if not inp.get("secretKey"):
            raise ValidationError("secretKey must be non-empty")
        if not inp.get("nonce"):
            raise ValidationError("nonce must be non-empty")
        if not inp.get("key"):
            raise ValidationError("key must be non-empty")
        self._put_private(tx.org, inp["key"], inp["secretKey"], inp["nonce"])

    def _put_private(self, owner: str, key: str, secret_key: str, nonce: str) -> None:
        existing = self._private.get((PRIVATE_COLLECTION, key))
        if existing is not None and existing["owner"] != owner:
            raise AuthorizationError(json.dumps({"Error": key}))
        self._private[(PRIVATE_COLLECTION, key)] = {
            "owner": owner,
            "secretKey": secret_key,
            "nonce": nonce,
        }

    def query_private_key(self, collection: str, key: str, identity: Identity) -> dict:
        entry = self._private.get((collection, key))
        if entry is None:
            raise NotFoundError(json.dumps({"Error": key}))
        if not self.auth.collection_readable(entry["owner"], identity.org):
            raise AuthorizationError(json.dumps({"Error": key}))
        return {"secretKey": entry["secretKey"], "nonce": entry["nonce"]}

    # -- contract: Certificates --

    def _create_certificate(self, tx: Transaction) -> None:
        if not self.auth.has_role(tx.org, tx.user, "auditor"):
            raise AuthorizationError(f"{tx.org}:{tx.user} is not an auditor")
        cert = Certificate.from_dict(json.loads(tx.args[0]))
        seq = len(self._cert_keys(cert.evidence_key))
        key = f"cert\x00{cert.evidence_key}\x00{seq:08d}"
        self._state[key] = json.dumps(cert.to_dict(), sort_keys=True)

    def _cert_keys(self, ev_key: str) -> list[str]:
        prefix = f"cert\x00{ev_key}\x00"
        return sorted(k for k in self._state if k.startswith(prefix))

    def query_certificates(self, ev_key: str, identity: Identity) -> list[Certificate]:
        allowed = self.auth.has_role(identity.org, identity.user, "auditor") or \
            self.auth.has_role(identity.org, identity.user, "external_auditor")
        if not allowed:
            raise AuthorizationError(
                f"{identity.org}:{identity.user} may not read certificates"
            )
        return [
            Certificate.from_dict(json.loads(self._state[k]))
            for k in self._cert_keys(ev_key)
        ]

    # -- contract: Update (GDPR) --

    def _update_evidence(self, tx: Transaction) -> None:
        key, new_h_v, new_h_l, reason = tx.args[0], tx.args[1], tx.args[2], tx.args[3]
        if key not in self._state:
            raise NotFoundError(f"no evidence at {key}")
        ev = Evidence.from_dict(json.loads(self._state[key]))

        authorized = self.auth.is_cleanup_client(tx.org, tx.user) or (
            tx.org == ev.organisation
            and (self.auth.has_role(tx.org, tx.user, "user")
                 or self.auth.has_role(tx.org, tx.user, "auditor"))
        )
        if not authorized:
            raise AuthorizationError(f"{tx.org}:{tx.user} may not update evidence")

        if not tx.transient or "oldRecord" not in tx.transient or "newRecord" not in tx.transient:
            raise ValidationError("transient oldRecord and newRecord are required")
        old = VerificationRecord.from_bytes(tx.transient["oldRecord"])
        new = VerificationRecord.from_bytes(tx.transient["newRecord"])

        if old.v.h_v != ev.verification_hash:
            raise ValidationError("old record does not match the anchored evidence")
        if new.v.h_v != new_h_v:
            raise ValidationError("new record does not match the proposed hash")
        if old.v.traceability != new.v.traceability:
            raise ValidationError("traceability level may not change")
        if old.v.cols != new.v.cols:
            raise ValidationError("column set may not change")
        if old.v.rows != new.v.rows:
            raise ValidationError("row count may not change")

        gdpr = set(old.v.gdpr)
        offending: list[str] = []
        if old.v.traceability in (1, 2):
            assert old.v.col_hash is not None and new.v.col_hash is not None
            for name in old.v.cols:
                if name not in gdpr and old.v.col_hash[name] != new.v.col_hash[name]:
                    offending.append(name)
        else:
            assert old.v.data is not None and new.v.data is not None
            for j, name in enumerate(old.v.cols):
                if name in gdpr:
                    continue
                if any(o[j] != n[j] for o, n in zip(old.v.data, new.v.data)):
                    offending.append(name)
        if offending:
            raise ValidationError(
                "non-GDPR columns changed: " + ", ".join(offending)
            )
        # Defense in depth: the per-column check above should subsume this.
        if old.v.gdpr_hash != new.v.gdpr_hash:
            raise ValidationError("gdpr-exempt hash changed: non-GDPR data was touched")

        log = UpdateLog(
            evidence_key=key,
            old_h_v=ev.verification_hash,
            new_h_v=new_h_v,
            old_h_l=ev.location_hash,
            new_h_l=new_h_l,
            org=tx.org,
            user=tx.user,
            reason=reason,
            timestamp=tx.timestamp,
        )
        ev.verification_hash = new_h_v
        ev.location_hash = new_h_l
        self._state[key] = json.dumps(ev.to_dict(), sort_keys=True)
        seq = len(self._log_keys(key))
        self._state[f"updatelog\x00{key}\x00{seq:08d}"] = json.dumps(
            log.to_dict(), sort_keys=True
        )

        # Fresh key material for the re-encrypted record travels in the
        # same transaction so the update is atomic.
        if tx.transient and "keys" in tx.transient:
            inp = json.loads(tx.transient["keys"].decode("utf-8"))
            if not inp.get("secretKey") or not inp.get("nonce"):
                raise ValidationError("replacement key material is incomplete")
            self._put_private(ev.organisation, key, inp["secretKey"], inp["nonce"])

    def _log_keys(self, ev_key: str) -> list[str]:
        prefix = f"updatelog\x00{ev_key}\x00"
        return sorted(k for k in self._state if k.startswith(prefix))

    def query_update_logs(self, ev_key: str) -> list[UpdateLog]:
        return [
            UpdateLog.from_dict(json.loads(self._state[k]))
            for k in self._log_keys(ev_key)
        ]

    # -- persistence --

    def serialized_chain(self) -> bytes:
        """Length-prefixed block file image (also used by secrecy scans)."""
        out = bytearray()
        for block in self._blocks:
            raw = json.dumps(block.to_dict(), sort_keys=True,
                             separators=(",", ":")).encode("utf-8")
            out += struct.pack(">I", len(raw))
            out += raw
        return bytes(out)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "blocks.dat").write_bytes(self.serialized_chain())
        snapshot = {
            "state": self._state,
            "private": [
                {"collection": c, "key": k, **v}
                for (c, k), v in sorted(self._private.items())
            ],
        }
        (directory / "state.json").write_text(
            json.dumps(snapshot, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path, auth: AuthTable,
             commit_delay_s: float = 0.0) -> "Ledger":
        directory = Path(directory)
        ledger = cls(auth, commit_delay_s)
        raw = (directory / "blocks.dat").read_bytes()
        blocks: list[Block] = []
        offset = 0
        while offset < len(raw):
            (length,) = struct.unpack_from(">I", raw, offset)
            offset += 4
            blocks.append(Block.from_dict(json.loads(raw[offset:offset + length])))
            offset += length
        ledger._blocks = blocks
        snapshot = json.loads((directory / "state.json").read_text(encoding="utf-8"))
        ledger._state = dict(snapshot["state"])
        ledger._private = {
            (e["collection"], e["key"]): {
                "owner": e["owner"], "secretKey": e["secretKey"], "nonce": e["nonce"]
            }
            for e in snapshot["private"]
        }
        return ledger
