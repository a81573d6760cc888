"""Content-addressed storage of cipher envelopes.

The address of an object is the SHA-256 of its bytes, so storing the
same content twice deduplicates and every read can be re-verified
against its own address before it is returned.
"""

from __future__ import annotations

import os
import re
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import CorruptionError, NotFoundError, StorageError, ValidationError
from .hashing import sha256_hex

_HEX64 = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class LocationHash:
    """Content address: lowercase-hex SHA-256 of the stored bytes."""

    digest: str

    def __post_init__(self) -> None:
        if not _HEX64.match(self.digest):
            raise ValidationError(f"not a sha-256 hex digest: {self.digest!r}")

    def __str__(self) -> str:
        return self.digest


@dataclass
class StatResult:
    exists: bool
    size: int


class ContentStore:
    """Interface shared by the in-memory and on-disk backends."""

    def put(self, content: bytes) -> LocationHash:
        raise NotImplementedError

    def get(self, addr: LocationHash) -> bytes:
        raise NotImplementedError

    def stat(self, addr: LocationHash) -> StatResult:
        raise NotImplementedError


class MemoryStore(ContentStore):
    """Dict-backed store for tests and benchmarks."""

    def __init__(self) -> None:
        self._objects: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._objects)

    def put(self, content: bytes) -> LocationHash:
        if not content:
            raise ValidationError("empty content is not storable")
        addr = LocationHash(sha256_hex(content))
        with self._lock:
            self._objects.setdefault(addr.digest, bytes(content))
        return addr

    def get(self, addr: LocationHash) -> bytes:
        try:
            content = self._objects[addr.digest]
        except KeyError:
            raise NotFoundError(f"no object at {addr}") from None
        if sha256_hex(content) != addr.digest:
            raise CorruptionError(f"object at {addr} no longer matches its address")
        return content

    def stat(self, addr: LocationHash) -> StatResult:
        content = self._objects.get(addr.digest)
        if content is None:
            return StatResult(False, 0)
        return StatResult(True, len(content))


class DiskStore(ContentStore):
    """Directory-per-prefix layout: ``objects/<first 2 hex>/<remaining hex>``."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)

    def _path(self, addr: LocationHash) -> Path:
        return self.root / "objects" / addr.digest[:2] / addr.digest[2:]

    def put(self, content: bytes) -> LocationHash:
        if not content:
            raise ValidationError("empty content is not storable")
        addr = LocationHash(sha256_hex(content))
        path = self._path(addr)
        if path.exists():
            return addr
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            # Write-then-rename so racing writers of the same content
            # converge on one complete object.
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(content)
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cannot persist object at {addr}: {exc}") from exc
        return addr

    def get(self, addr: LocationHash) -> bytes:
        path = self._path(addr)
        try:
            content = path.read_bytes()
        except FileNotFoundError:
            raise NotFoundError(f"no object at {addr}") from None
        except OSError as exc:
            raise StorageError(f"cannot read object at {addr}: {exc}") from exc
        if sha256_hex(content) != addr.digest:
            raise CorruptionError(f"object at {addr} no longer matches its address")
        return content

    def stat(self, addr: LocationHash) -> StatResult:
        path = self._path(addr)
        if not path.exists():
            return StatResult(False, 0)
        return StatResult(True, path.stat().st_size)
