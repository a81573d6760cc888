"""Digest backend selection.

The compiled extension (``auditem._hashcore``, Cython over OpenSSL) is
preferred; the pure-Python module is the fallback when the extension is
not built for this interpreter.  Set ``AUDITEM_PURE_HASH=1`` to force
the fallback, e.g. for the kernel benchmark baseline.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _hashcore_py


def _select() -> ModuleType:
    if os.environ.get("AUDITEM_PURE_HASH"):
        return _hashcore_py
    try:
        from . import _hashcore  # type: ignore[attr-defined]

        return _hashcore
    except ImportError:
        return _hashcore_py


def load_backend(name: str) -> ModuleType:
    """Load a backend by name ("compiled" or "python"); raises ImportError."""
    if name == "python":
        return _hashcore_py
    if name == "compiled":
        from . import _hashcore  # type: ignore[attr-defined]

        return _hashcore
    raise ValueError(f"unknown hash backend: {name}")


def available_backends() -> list[str]:
    names = []
    try:
        load_backend("compiled")
        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names


_impl = _select()

BACKEND: str = _impl.IMPL
sha256_hex = _impl.sha256_hex
grid_header = _impl.grid_header
row_bytes = _impl.row_bytes
subset_digest = _impl.subset_digest
column_digest = _impl.column_digest
row_digest = _impl.row_digest
column_digests = _impl.column_digests
row_digests = _impl.row_digests
