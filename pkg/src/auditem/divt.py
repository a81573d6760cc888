"""Protocol orchestration: upload, two-tier verification, certificates,
and GDPR-constrained updates.

The fast path (verify1) only compares the recomputed subset hash with
the anchored one; the deep path (verify2) decrypts the off-chain record
and diffs attribute by attribute, so audits escalate to it only when the
fast path mismatches.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import attributes as att
from . import crypto
from .attributes import TamperReport, Verdict, VerificationRecord
from .cas import ContentStore, LocationHash
from .errors import (
    AuditemError,
    CorruptionError,
    DecryptionError,
    DuplicateKeyError,
    NotFoundError,
)
from .ledger import (
    PRIVATE_COLLECTION,
    Certificate,
    Evidence,
    Identity,
    Ledger,
    Transaction,
    evidence_key,
)
from .warehouse import BatchSubset


@dataclass
class UploadResult:
    evidence_key: str
    h_v: str
    h_l: str


@dataclass
class Verify1Result:
    match: bool
    h_v: str
    h_v_chain: str | None
    missing: bool = False


@dataclass
class UpdateReceipt:
    evidence_key: str
    old_h_v: str
    new_h_v: str
    new_h_l: str
    block_height: int


@dataclass
class DivtClient:
    """Binds one ledger and one content store into the protocol flows."""

    ledger: Ledger
    store: ContentStore
    stats: dict[str, int] = field(default_factory=lambda: {"decrypt_calls": 0,
                                                           "verify2_calls": 0})

    # -- phase 1: upload --

    def upload(self, batch: BatchSubset, level: int, identity: Identity) -> UploadResult:
        key = evidence_key(identity.org, batch.table_id, batch.batch_id)
        try:
            self.ledger.query_evidence(key)
        except NotFoundError:
            pass
        else:
            raise DuplicateKeyError(
                f"the batch already exists: ({batch.table_id}, {batch.batch_id})"
            )

        ident = att.id_att_gen(batch, identity.org)
        v = att.vrfc_att_gen(batch, level)
        record = att.rec_gen(ident, v)
        material = crypto.keygen()
        envelope = crypto.encrypt(record.canonical_bytes(), material)

        # Off-chain first: a dangling CAS object is harmless, a dangling
        # on-chain evidence pointer is not.
        h_l = self.store.put(envelope.blob)

        evidence = Evidence(
            organisation=identity.org,
            table_name=batch.table_id,
            batch_id=batch.batch_id,
            verification_hash=v.h_v,
            location_hash=h_l.digest,
            traceability=level,
        )
        ev_tx = Transaction.create(
            identity, "Evidence", "createEvidence",
            [key, json.dumps(evidence.to_dict(), sort_keys=True)],
        )
        receipt = self.ledger.submit(ev_tx)
        if not receipt.ok:
            # Losing a duplicate race aborts here, before the collection is
            # touched; the already-written CAS object is harmless.
            if "already exists" in receipt.error:
                raise DuplicateKeyError(receipt.error)
            raise AuditemError(f"upload failed at stage create_evidence: {receipt.error}")

        key_tx = Transaction.create(
            identity, "PrivateKeys", "createPrivateKey", [],
            transient={"keys": json.dumps({
                "secretKey": material.secret_key_hex,
                "nonce": material.nonce_hex,
                "key": key,
            }).encode("utf-8")},
        )
        receipt = self.ledger.submit(key_tx)
        if not receipt.ok:
            raise AuditemError(f"upload failed at stage create_private_key: {receipt.error}")
        return UploadResult(evidence_key=key, h_v=v.h_v, h_l=h_l.digest)

    # -- phase 2: verification --

    def verify1(self, batch: BatchSubset, identity: Identity) -> Verify1Result:
        h_v = att.subset_hash(batch)
        key = evidence_key(identity.org, batch.table_id, batch.batch_id)
        try:
            evidence = self.ledger.query_evidence(key)
        except NotFoundError:
            return Verify1Result(match=False, h_v=h_v, h_v_chain=None, missing=True)
        return Verify1Result(
            match=h_v == evidence.verification_hash,
            h_v=h_v,
            h_v_chain=evidence.verification_hash,
        )

    def verify2(self, batch: BatchSubset, identity: Identity) -> TamperReport:
        self.stats["verify2_calls"] += 1
        key = evidence_key(identity.org, batch.table_id, batch.batch_id)
        try:
            evidence = self.ledger.query_evidence(key)
        except NotFoundError:
            return TamperReport(
                table_id=batch.table_id,
                batch_id=batch.batch_id,
                verdict=Verdict.MISSING_EVIDENCE,
                notes="no evidence anchored for this batch",
            )

        reference = self._fetch_record(evidence, key, identity)
        if isinstance(reference, TamperReport):
            return reference.for_batch(batch.table_id, batch.batch_id)

        # Always recompute at the anchored level; honoring a caller-chosen
        # level would allow verification downgrades.
        current = att.vrfc_att_gen(batch, evidence.traceability)
        report = att.diff_attributes(current, reference.v)
        report = report.for_batch(batch.table_id, batch.batch_id)
        self._certify(key, report, identity)
        return report

    def _fetch_record(
        self, evidence: Evidence, key: str, identity: Identity
    ) -> VerificationRecord | TamperReport:
        """Fetch + decrypt the off-chain record, or a Corrupted report."""
        try:
            blob = self.store.get(LocationHash(evidence.location_hash))
        except (NotFoundError, CorruptionError) as exc:
            return TamperReport(
                verdict=Verdict.CORRUPTED,
                notes=f"off-chain record compromised: {exc}",
            )
        material_d = self.ledger.query_private_key(PRIVATE_COLLECTION, key, identity)
        material = crypto.KeyMaterial.from_hex(material_d["secretKey"], material_d["nonce"])
        self.stats["decrypt_calls"] += 1
        try:
            raw = crypto.decrypt(crypto.CipherEnvelope(blob), material)
        except DecryptionError:
            return TamperReport(
                verdict=Verdict.CORRUPTED,
                notes="off-chain record compromised: decryption authentication failed",
            )
        return VerificationRecord.from_bytes(raw)

    def _certify(self, key: str, report: TamperReport, identity: Identity) -> None:
        # Certificates are written for tampered outcomes too, as an audit
        # trail extension of the pass-only convention.
        result = "Authentic" if report.verdict is Verdict.AUTHENTIC else "Tampered"
        cert = Certificate(
            evidence_key=key,
            date=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            auditor_org=identity.org,
            auditor_user=identity.user,
            result=result,
            detail=report.summary(),
        )
        tx = Transaction.create(
            identity, "Certificates", "createCertificate",
            [json.dumps(cert.to_dict(), sort_keys=True)],
        )
        self.ledger.submit(tx)

    def audit(
        self, registry, table_id: str, batch_ids: list[str], identity: Identity
    ) -> list[TamperReport]:
        """Tiered audit: verify1 per batch, verify2 only on mismatch."""
        reports: list[TamperReport] = []
        for batch_id in batch_ids:
            try:
                batch = registry.get(table_id, batch_id)
            except NotFoundError as exc:
                reports.append(TamperReport(
                    table_id=table_id, batch_id=batch_id,
                    verdict=Verdict.MISSING_EVIDENCE, notes=str(exc),
                ))
                continue
            quick = self.verify1(batch, identity)
            if quick.missing:
                reports.append(TamperReport(
                    table_id=table_id, batch_id=batch_id,
                    verdict=Verdict.MISSING_EVIDENCE,
                    notes="no evidence anchored for this batch",
                ))
            elif quick.match:
                reports.append(TamperReport(
                    table_id=table_id, batch_id=batch_id, verdict=Verdict.AUTHENTIC,
                ))
            else:
                reports.append(self.verify2(batch, identity))
        return reports

    # -- GDPR update --

    def gdpr_delete(
        self, batch: BatchSubset, reason: str, identity: Identity
    ) -> UpdateReceipt:
        """Replace the anchored record after a GDPR-only mutation of the batch.

        The contract rejects the update unless every changed column is
        GDPR-flagged, so this cannot be used to whitewash other edits.
        """
        key = evidence_key(identity.org, batch.table_id, batch.batch_id)
        evidence = self.ledger.query_evidence(key)

        old_record = self._fetch_record(evidence, key, identity)
        if isinstance(old_record, TamperReport):
            raise CorruptionError(old_record.notes)

        new_v = att.vrfc_att_gen(batch, evidence.traceability)
        new_record = att.rec_gen(old_record.id, new_v)
        material = crypto.keygen()
        envelope = crypto.encrypt(new_record.canonical_bytes(), material)
        h_l = self.store.put(envelope.blob)

        tx = Transaction.create(
            identity, "Update", "updateEvidence",
            [key, new_v.h_v, h_l.digest, reason],
            transient={
                "oldRecord": old_record.canonical_bytes(),
                "newRecord": new_record.canonical_bytes(),
                "keys": json.dumps({
                    "secretKey": material.secret_key_hex,
                    "nonce": material.nonce_hex,
                    "key": key,
                }).encode("utf-8"),
            },
        )
        receipt = self.ledger.submit(tx)
        if not receipt.ok:
            raise AuditemError(f"gdpr update rejected: {receipt.error}")
        return UpdateReceipt(
            evidence_key=key,
            old_h_v=evidence.verification_hash,
            new_h_v=new_v.h_v,
            new_h_l=h_l.digest,
            block_height=receipt.block_height,
        )

    # -- external auditors --

    def external_audit(self, key: str, identity: Identity) -> list[Certificate]:
        return self.ledger.query_certificates(key, identity)
