"""Ledger simulator: identities, contracts, blocks, persistence."""

import hashlib
import json
import threading

import pytest

from auditem.attributes import id_att_gen, rec_gen, vrfc_att_gen
from auditem.errors import (
    AuthorizationError,
    NotFoundError,
    ValidationError,
)
from auditem.ledger import (
    PRIVATE_COLLECTION,
    AuthTable,
    Certificate,
    Evidence,
    Ledger,
    Transaction,
    evidence_key,
)

from conftest import make_batch


def _evidence(org="Electron", table="cables", batch="100", h_v="a" * 64,
              h_l="b" * 64, level=1) -> Evidence:
    return Evidence(org, table, batch, h_v, h_l, level)


def _create_tx(identity, ev: Evidence) -> Transaction:
    return Transaction.create(
        identity, "Evidence", "createEvidence",
        [ev.key(), json.dumps(ev.to_dict(), sort_keys=True)],
    )


class TestEvidenceKey:
    def test_frozen_oracle(self):
        expected = hashlib.sha256(b"LowVoltage|cables|100").hexdigest()
        assert evidence_key("LowVoltage", "cables", "100") == expected

    def test_distinct_identities_distinct_keys(self):
        assert evidence_key("a", "b", "c") != evidence_key("a", "b", "d")
        assert evidence_key("a", "bc", "d") != evidence_key("ab", "c", "d")


class TestAuthTable:
    def test_identity_and_roles(self, auth):
        ident = auth.identity("Electron", "ida")
        assert auth.has_role("Electron", "ida", "auditor")
        assert not auth.has_role("Electron", "alice", "auditor")
        sig = ident.sign(b"payload")
        assert auth.verify("Electron", "ida", b"payload", sig)
        assert not auth.verify("Electron", "ida", b"other", sig)
        assert not auth.verify("Electron", "ghost", b"payload", sig)

    def test_unknown_identity(self, auth):
        with pytest.raises(AuthorizationError):
            auth.identity("Nobody", "here")

    def test_unknown_role_rejected(self, auth):
        with pytest.raises(ValidationError):
            auth.add_identity("X", "y", "emperor")

    def test_collection_grants(self, auth):
        assert auth.collection_readable("Electron", "Electron")
        assert auth.collection_readable("Electron", "AuditCorp")
        assert not auth.collection_readable("Electron", "Mallory")

    def test_from_text(self):
        table = AuthTable.from_text(
            "# comment\n"
            "seed = s3cret\n"
            "role Org1:u1 = user, auditor\n"
            "role Org2:v = external_auditor\n"
            "grant Org1 = Org2\n"
            "cleanup = Org1:gdpr\n"
        )
        assert table.seed == "s3cret"
        assert table.has_role("Org1", "u1", "auditor")
        assert table.has_role("Org2", "v", "external_auditor")
        assert table.collection_readable("Org1", "Org2")
        assert table.is_cleanup_client("Org1", "gdpr")

    def test_seed_binds_secrets(self):
        a = AuthTable(seed="one")
        b = AuthTable(seed="two")
        a.add_identity("O", "u", "user")
        b.add_identity("O", "u", "user")
        assert a.identity("O", "u").secret != b.identity("O", "u").secret


class TestTransactions:
    def test_signature_covers_args(self, auth):
        ident = auth.identity("Electron", "alice")
        tx = _create_tx(ident, _evidence())
        assert auth.verify(tx.org, tx.user, tx.signing_payload(), tx.signature)
        tx.args[1] = tx.args[1].replace("a", "e", 1)
        assert not auth.verify(tx.org, tx.user, tx.signing_payload(), tx.signature)

    def test_signature_covers_transient(self, auth):
        ident = auth.identity("Electron", "alice")
        tx = Transaction.create(ident, "PrivateKeys", "createPrivateKey", [],
                                transient={"keys": b"abc"})
        assert auth.verify(tx.org, tx.user, tx.signing_payload(), tx.signature)
        tx.transient = {"keys": b"abd"}
        assert not auth.verify(tx.org, tx.user, tx.signing_payload(), tx.signature)

    def test_transient_never_in_block_dict(self, auth):
        ident = auth.identity("Electron", "alice")
        tx = Transaction.create(ident, "PrivateKeys", "createPrivateKey", [],
                                transient={"keys": b"super-secret"})
        doc = tx.to_block_dict("ok")
        assert "transient" not in doc
        assert "super-secret" not in json.dumps(doc)


class TestSubmit:
    def test_commit_appends_block_and_state(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        ev = _evidence()
        receipt = ledger.submit(_create_tx(ident, ev))
        assert receipt.ok
        assert receipt.block_height == 1
        assert ledger.height == 1
        assert ledger.query_evidence(ev.key()).verification_hash == "a" * 64
        assert ledger.verify_chain().ok

    def test_bad_signature_rejected_before_ordering(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        tx = _create_tx(ident, _evidence())
        tx.signature = "0" * 64
        receipt = ledger.submit(tx)
        assert receipt.status == "rejected"
        assert ledger.height == 0  # never reached a block

    def test_failed_tx_recorded_and_state_rolled_back(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        ev = _evidence()
        assert ledger.submit(_create_tx(ident, ev)).ok
        root_before = ledger._state_root()
        receipt = ledger.submit(_create_tx(ident, ev))  # duplicate
        assert receipt.status == "failed"
        assert "already exists" in receipt.error
        assert ledger.height == 2  # failure is part of history
        assert ledger._state_root() == root_before
        assert ledger._blocks[-1].txs[0]["status"] == "failed"

    def test_unknown_function_fails(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        tx = Transaction.create(ident, "Evidence", "dropTable", [])
        receipt = ledger.submit(tx)
        assert receipt.status == "failed"
        assert "unknown contract function" in receipt.error

    def test_queries_append_no_blocks(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        ev = _evidence()
        ledger.submit(_create_tx(ident, ev))
        height = ledger.height
        ledger.query_evidence(ev.key())
        ledger.query_by_owner("Electron")
        with pytest.raises(NotFoundError):
            ledger.query_evidence("0" * 64)
        assert ledger.height == height


class TestEvidenceContract:
    def test_key_must_match_identity(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        ev = _evidence()
        tx = Transaction.create(ident, "Evidence", "createEvidence",
                                ["0" * 64, json.dumps(ev.to_dict())])
        receipt = ledger.submit(tx)
        assert receipt.status == "failed"
        assert "does not match" in receipt.error

    def test_cannot_create_for_other_org(self, ledger, auth):
        mallory = auth.identity("Mallory", "mal")
        receipt = ledger.submit(_create_tx(mallory, _evidence(org="Electron")))
        assert receipt.status == "failed"
        assert "may not create" in receipt.error

    def test_owner_index(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        ev1, ev2 = _evidence(batch="1"), _evidence(batch="2")
        ledger.submit(_create_tx(ident, ev1))
        ledger.submit(_create_tx(ident, ev2))
        assert ledger.query_by_owner("Electron") == sorted([ev1.key(), ev2.key()])
        assert ledger.query_by_owner("Mallory") == []


class TestPrivateKeys:
    def _key_tx(self, ident, payload: bytes) -> Transaction:
        return Transaction.create(ident, "PrivateKeys", "createPrivateKey", [],
                                  transient={"keys": payload})

    def test_create_and_query(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        payload = json.dumps({"secretKey": "aa", "nonce": "bb", "key": "k1"})
        assert ledger.submit(self._key_tx(ident, payload.encode())).ok
        entry = ledger.query_private_key(PRIVATE_COLLECTION, "k1", ident)
        assert entry == {"secretKey": "aa", "nonce": "bb"}
        # Granted org can read, stranger cannot.
        eve = auth.identity("AuditCorp", "eve")
        assert ledger.query_private_key(PRIVATE_COLLECTION, "k1", eve) == entry
        with pytest.raises(AuthorizationError):
            ledger.query_private_key(PRIVATE_COLLECTION, "k1",
                                     auth.identity("Mallory", "mal"))

    def test_missing_or_invalid_transient(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        tx = Transaction.create(ident, "PrivateKeys", "createPrivateKey", [])
        assert ledger.submit(tx).status == "failed"
        assert ledger.submit(self._key_tx(ident, b"not json")).status == "failed"
        incomplete = json.dumps({"secretKey": "", "nonce": "bb", "key": "k"})
        assert ledger.submit(self._key_tx(ident, incomplete.encode())).status == "failed"

    def test_other_org_cannot_overwrite(self, ledger, auth):
        alice = auth.identity("Electron", "alice")
        mallory = auth.identity("Mallory", "mal")
        mine = json.dumps({"secretKey": "aa", "nonce": "bb", "key": "k1"})
        theirs = json.dumps({"secretKey": "cc", "nonce": "dd", "key": "k1"})
        assert ledger.submit(self._key_tx(alice, mine.encode())).ok
        receipt = ledger.submit(self._key_tx(mallory, theirs.encode()))
        assert receipt.status == "failed"
        entry = ledger.query_private_key(PRIVATE_COLLECTION, "k1", alice)
        assert entry["secretKey"] == "aa"

    def test_missing_key_error_names_key(self, ledger, auth):
        ident = auth.identity("Electron", "alice")
        with pytest.raises(NotFoundError) as err:
            ledger.query_private_key(PRIVATE_COLLECTION, "ghost", ident)
        assert json.loads(str(err.value)) == {"Error": "ghost"}


class TestCertificates:
    def _cert_tx(self, ident, ev_key="k" * 8) -> Transaction:
        cert = Certificate(ev_key, "2017-12-09", ident.org, ident.user,
                           "Authentic", "authentic")
        return Transaction.create(ident, "Certificates", "createCertificate",
                                  [json.dumps(cert.to_dict())])

    def test_only_auditors_create(self, ledger, auth):
        alice = auth.identity("Electron", "alice")
        receipt = ledger.submit(self._cert_tx(alice))
        assert receipt.status == "failed"
        assert "not an auditor" in receipt.error
        ida = auth.identity("Electron", "ida")
        assert ledger.submit(self._cert_tx(ida)).ok

    def test_query_roles_and_ordering(self, ledger, auth):
        ida = auth.identity("Electron", "ida")
        ledger.submit(self._cert_tx(ida))
        ledger.submit(self._cert_tx(ida))
        certs = ledger.query_certificates("k" * 8, ida)
        assert len(certs) == 2
        eve = auth.identity("AuditCorp", "eve")  # external auditor may read
        assert len(ledger.query_certificates("k" * 8, eve)) == 2
        with pytest.raises(AuthorizationError):
            ledger.query_certificates("k" * 8, auth.identity("Electron", "alice"))


class TestUpdateContract:
    """Direct contract-level checks; end-to-end updates live in test_divt."""

    def _setup(self, ledger, auth, level=1):
        batch = make_batch(
            [["a1", "p1"], ["a2", "p2"]], gdpr=("c1",),
            table_id="cables", batch_id="9",
        )
        ident = auth.identity("Electron", "alice")
        v = vrfc_att_gen(batch, level)
        record = rec_gen(id_att_gen(batch, "Electron"), v)
        ev = Evidence("Electron", "cables", "9", v.h_v, "c" * 64, level)
        ledger.submit(_create_tx(ident, ev))
        return batch, ident, record, ev

    def _update_tx(self, ident, ev, old_record, new_record, h_l="d" * 64):
        return Transaction.create(
            ident, "Update", "updateEvidence",
            [ev.key(), new_record.v.h_v, h_l, "erasure request"],
            transient={
                "oldRecord": old_record.canonical_bytes(),
                "newRecord": new_record.canonical_bytes(),
            },
        )

    def test_gdpr_only_change_accepted_and_logged(self, ledger, auth):
        batch, ident, record, ev = self._setup(ledger, auth)
        mutated = batch.copy()
        mutated.rows[0][1] = ""  # c1 is GDPR-flagged
        new_record = rec_gen(record.id, vrfc_att_gen(mutated, 1))
        receipt = ledger.submit(self._update_tx(ident, ev, record, new_record))
        assert receipt.ok
        anchored = ledger.query_evidence(ev.key())
        assert anchored.verification_hash == new_record.v.h_v
        assert anchored.location_hash == "d" * 64
        (log,) = ledger.query_update_logs(ev.key())
        assert log.old_h_v == record.v.h_v
        assert log.new_h_v == new_record.v.h_v
        assert log.reason == "erasure request"

    def test_non_gdpr_change_rejected_naming_column(self, ledger, auth):
        batch, ident, record, ev = self._setup(ledger, auth)
        mutated = batch.copy()
        mutated.rows[0][0] = "forged"  # c0 is not GDPR-flagged
        new_record = rec_gen(record.id, vrfc_att_gen(mutated, 1))
        receipt = ledger.submit(self._update_tx(ident, ev, record, new_record))
        assert receipt.status == "failed"
        assert "c0" in receipt.error
        assert ledger.query_evidence(ev.key()).verification_hash == record.v.h_v
        assert ledger.query_update_logs(ev.key()) == []

    def test_stale_old_record_rejected(self, ledger, auth):
        batch, ident, record, ev = self._setup(ledger, auth)
        stale_batch = batch.copy()
        stale_batch.rows[1][1] = "different"
        stale = rec_gen(record.id, vrfc_att_gen(stale_batch, 1))
        receipt = ledger.submit(self._update_tx(ident, ev, stale, stale))
        assert receipt.status == "failed"
        assert "does not match the anchored evidence" in receipt.error

    def test_row_count_change_rejected(self, ledger, auth):
        batch, ident, record, ev = self._setup(ledger, auth)
        shrunk = batch.copy()
        del shrunk.rows[1]
        new_record = rec_gen(record.id, vrfc_att_gen(shrunk, 1))
        receipt = ledger.submit(self._update_tx(ident, ev, record, new_record))
        assert receipt.status == "failed"
        assert "row count" in receipt.error

    def test_unauthorized_updater_rejected(self, ledger, auth):
        batch, _, record, ev = self._setup(ledger, auth)
        mutated = batch.copy()
        mutated.rows[0][1] = ""
        new_record = rec_gen(record.id, vrfc_att_gen(mutated, 1))
        mallory = auth.identity("Mallory", "mal")
        receipt = ledger.submit(self._update_tx(mallory, ev, record, new_record))
        assert receipt.status == "failed"
        assert "may not update" in receipt.error

    def test_cleanup_client_may_update(self, ledger, auth):
        batch, _, record, ev = self._setup(ledger, auth)
        mutated = batch.copy()
        mutated.rows[0][1] = ""
        new_record = rec_gen(record.id, vrfc_att_gen(mutated, 1))
        cleaner = auth.identity("Electron", "cleaner")
        assert ledger.submit(self._update_tx(cleaner, ev, record, new_record)).ok

    def test_level3_uses_embedded_data(self, ledger, auth):
        batch, ident, record, ev = self._setup(ledger, auth, level=3)
        mutated = batch.copy()
        mutated.rows[1][0] = "forged"
        new_record = rec_gen(record.id, vrfc_att_gen(mutated, 3))
        receipt = ledger.submit(self._update_tx(ident, ev, record, new_record))
        assert receipt.status == "failed"
        assert "c0" in receipt.error


class TestChainAndPersistence:
    def _filled_ledger(self, auth, n=5) -> Ledger:
        ledger = Ledger(auth)
        ident = auth.identity("Electron", "alice")
        for i in range(n):
            ledger.submit(_create_tx(ident, _evidence(batch=str(i))))
        return ledger

    def test_verify_chain_detects_tx_tamper(self, auth):
        ledger = self._filled_ledger(auth)
        ledger._blocks[3].txs[0]["args"][1] = "{}"
        check = ledger.verify_chain()
        assert not check.ok
        assert check.first_bad_height == 3

    def test_verify_chain_detects_relink(self, auth):
        ledger = self._filled_ledger(auth)
        block = ledger._blocks[2]
        block.txs[0]["args"][1] = "{}"
        block.block_hash = block.compute_hash()  # recompute to hide the edit
        check = ledger.verify_chain()
        assert not check.ok
        assert check.first_bad_height == 3  # broken prev link surfaces next

    def test_save_load_round_trip(self, auth, tmp_path):
        ledger = self._filled_ledger(auth)
        ident = auth.identity("Electron", "alice")
        payload = json.dumps({"secretKey": "aa", "nonce": "bb", "key": "k"})
        ledger.submit(Transaction.create(ident, "PrivateKeys", "createPrivateKey",
                                         [], transient={"keys": payload.encode()}))
        ledger.save(tmp_path / "ledger")
        again = Ledger.load(tmp_path / "ledger", auth)
        assert again.height == ledger.height
        assert again.verify_chain().ok
        assert again._state == ledger._state
        assert again.query_private_key(PRIVATE_COLLECTION, "k", ident) == \
            {"secretKey": "aa", "nonce": "bb"}

    def test_commit_delay_slows_commits(self, auth):
        ledger = Ledger(auth, commit_delay_s=0.02)
        ident = auth.identity("Electron", "alice")
        receipt = ledger.submit(_create_tx(ident, _evidence()))
        assert receipt.latency_s >= 0.02
