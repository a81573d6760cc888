"""Tamper-evident verification of warehouse batches.

Batches of tabular data are hashed into verification attributes at a
chosen traceability level, anchored as evidence on a simulated
permissioned ledger, and backed by AES-GCM encrypted verification
records in a content-addressed store.  Audits run in two tiers: a fast
subset-hash comparison, escalating to an attribute-by-attribute diff.
"""

from .attributes import (
    CellChange,
    IdentificationAttribute,
    TamperReport,
    Verdict,
    VerificationAttribute,
    VerificationRecord,
    diff_attributes,
    id_att_gen,
    rec_gen,
    subset_hash,
    vrfc_att_gen,
)
from .cas import DiskStore, LocationHash, MemoryStore
from .crypto import CipherEnvelope, KeyMaterial, decrypt, encrypt, keygen
from .divt import DivtClient
from .ledger import AuthTable, Certificate, Evidence, Identity, Ledger, evidence_key
from .warehouse import BatchRegistry, BatchSubset, ColumnSpec, load_batches

__all__ = [
    "AuthTable",
    "BatchRegistry",
    "BatchSubset",
    "Certificate",
    "CellChange",
    "CipherEnvelope",
    "ColumnSpec",
    "DiskStore",
    "DivtClient",
    "Evidence",
    "IdentificationAttribute",
    "Identity",
    "KeyMaterial",
    "Ledger",
    "LocationHash",
    "MemoryStore",
    "TamperReport",
    "Verdict",
    "VerificationAttribute",
    "VerificationRecord",
    "decrypt",
    "diff_attributes",
    "encrypt",
    "evidence_key",
    "id_att_gen",
    "keygen",
    "load_batches",
    "rec_gen",
    "subset_hash",
    "vrfc_att_gen",
]

__version__ = "0.1.0"
