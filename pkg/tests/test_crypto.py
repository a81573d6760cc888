"""Authenticated encryption of verification records."""

import secrets

import pytest

from auditem.crypto import (
    KEY_SIZE,
    NONCE_SIZE,
    TAG_SIZE,
    CipherEnvelope,
    KeyMaterial,
    decrypt,
    encrypt,
    keygen,
)
from auditem.errors import DecryptionError


def test_keygen_sizes_and_freshness():
    a, b = keygen(), keygen()
    assert len(a.secret_key) == KEY_SIZE
    assert len(a.nonce) == NONCE_SIZE
    assert (a.secret_key, a.nonce) != (b.secret_key, b.nonce)


def test_key_material_validation():
    with pytest.raises(ValueError):
        KeyMaterial(b"short", b"0" * NONCE_SIZE)
    with pytest.raises(ValueError):
        KeyMaterial(b"0" * KEY_SIZE, b"short")


def test_hex_round_trip():
    material = keygen()
    again = KeyMaterial.from_hex(material.secret_key_hex, material.nonce_hex)
    assert again == material


def test_round_trip():
    material = keygen()
    plaintext = b'{"record":"payload"}'
    envelope = encrypt(plaintext, material)
    assert decrypt(envelope, material) == plaintext
    assert len(envelope.blob) == len(plaintext) + TAG_SIZE
    assert envelope.ciphertext != plaintext
    assert len(envelope.auth_tag) == TAG_SIZE


def test_wrong_key_and_nonce_fail():
    material = keygen()
    envelope = encrypt(b"secret", material)
    with pytest.raises(DecryptionError):
        decrypt(envelope, keygen())
    skewed = KeyMaterial(material.secret_key, secrets.token_bytes(NONCE_SIZE))
    with pytest.raises(DecryptionError):
        decrypt(envelope, skewed)


def test_any_bit_flip_fails_authentication():
    material = keygen()
    envelope = encrypt(b"tiny", material)
    for byte_index in range(len(envelope.blob)):
        for bit in range(8):
            blob = bytearray(envelope.blob)
            blob[byte_index] ^= 1 << bit
            with pytest.raises(DecryptionError):
                decrypt(CipherEnvelope(bytes(blob)), material)


def test_truncation_fails():
    material = keygen()
    envelope = encrypt(b"some record", material)
    with pytest.raises(DecryptionError):
        decrypt(CipherEnvelope(envelope.blob[:-1]), material)
