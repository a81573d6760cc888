"""Key generation and authenticated encryption of verification records.

AES-256-GCM is used so that any bit flip of the stored ciphertext (or a
wrong key/nonce) fails loudly at decryption instead of yielding garbage.
One (key, nonce) pair encrypts exactly one record.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import DecryptionError

KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16


@dataclass(frozen=True)
class KeyMaterial:
    """A fresh AES-256 key and GCM nonce; hex-encoded at rest."""

    secret_key: bytes
    nonce: bytes

    def __post_init__(self) -> None:
        if len(self.secret_key) != KEY_SIZE:
            raise ValueError(f"secret key must be {KEY_SIZE} bytes")
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")

    @property
    def secret_key_hex(self) -> str:
        return self.secret_key.hex()

    @property
    def nonce_hex(self) -> str:
        return self.nonce.hex()

    @classmethod
    def from_hex(cls, secret_key_hex: str, nonce_hex: str) -> "KeyMaterial":
        return cls(bytes.fromhex(secret_key_hex), bytes.fromhex(nonce_hex))


@dataclass(frozen=True)
class CipherEnvelope:
    """Ciphertext with the 16-byte GCM tag carried inline at the tail."""

    blob: bytes

    @property
    def ciphertext(self) -> bytes:
        return self.blob[:-TAG_SIZE]

    @property
    def auth_tag(self) -> bytes:
        return self.blob[-TAG_SIZE:]


def keygen() -> KeyMaterial:
    """Fresh uniformly random key material from the OS CSPRNG."""
    return KeyMaterial(secrets.token_bytes(KEY_SIZE), secrets.token_bytes(NONCE_SIZE))


def encrypt(record_bytes: bytes, k: KeyMaterial) -> CipherEnvelope:
    blob = AESGCM(k.secret_key).encrypt(k.nonce, record_bytes, None)
    return CipherEnvelope(blob)


def decrypt(env: CipherEnvelope, k: KeyMaterial) -> bytes:
    try:
        return AESGCM(k.secret_key).decrypt(k.nonce, env.blob, None)
    except InvalidTag:
        raise DecryptionError("authentication failed") from None
