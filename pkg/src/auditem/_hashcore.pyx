# cython: language_level=3
"""Compiled canonical hashing kernels backed by OpenSSL's SHA-256.

Must stay bit-identical to auditem._hashcore_py; the test suite
cross-checks the two backends on random grids.
"""

from cpython.unicode cimport PyUnicode_AsUTF8AndSize
from libc.stdlib cimport malloc, free

cdef extern from "openssl/evp.h":
    ctypedef struct EVP_MD_CTX:
        pass
    ctypedef struct EVP_MD:
        pass
    const EVP_MD *EVP_sha256()
    EVP_MD_CTX *EVP_MD_CTX_new()
    void EVP_MD_CTX_free(EVP_MD_CTX *ctx)
    int EVP_DigestInit_ex(EVP_MD_CTX *ctx, const EVP_MD *md, void *impl)
    int EVP_DigestUpdate(EVP_MD_CTX *ctx, const void *d, size_t cnt)
    int EVP_DigestFinal_ex(EVP_MD_CTX *ctx, unsigned char *out, unsigned int *outlen)

IMPL = "compiled"

cdef const char *_HEXDIGITS = b"0123456789abcdef"
cdef char _US = 0x1f
cdef char _RS = 0x1e


cdef str _hex(unsigned char *digest, unsigned int n):
    cdef char out[129]
    cdef unsigned int i
    for i in range(n):
        out[2 * i] = _HEXDIGITS[digest[i] >> 4]
        out[2 * i + 1] = _HEXDIGITS[digest[i] & 0x0f]
    return out[:2 * n].decode("ascii")


cdef inline int _update_str(EVP_MD_CTX *ctx, object s) except -1:
    cdef Py_ssize_t n
    cdef const char *buf = PyUnicode_AsUTF8AndSize(s, &n)
    if buf == NULL:
        raise TypeError("cell is not a str")
    EVP_DigestUpdate(ctx, buf, <size_t>n)
    return 0


cdef inline int _update_byte(EVP_MD_CTX *ctx, char b) except -1:
    EVP_DigestUpdate(ctx, &b, 1)
    return 0


cdef str _final_hex(EVP_MD_CTX *ctx):
    cdef unsigned char digest[64]
    cdef unsigned int n = 0
    EVP_DigestFinal_ex(ctx, digest, &n)
    return _hex(digest, n)


def sha256_hex(data):
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef const unsigned char[::1] view = data
    try:
        EVP_DigestInit_ex(ctx, EVP_sha256(), NULL)
        if len(view) > 0:
            EVP_DigestUpdate(ctx, &view[0], <size_t>len(view))
        return _final_hex(ctx)
    finally:
        EVP_MD_CTX_free(ctx)


def grid_header(cols, n_rows):
    # Kept in Python form: called once per grid, never hot.
    parts = [str(n_rows).encode("ascii")]
    parts.extend(c.encode("utf-8") for c in cols)
    return b"\x1f".join(parts) + b"\x1e"


def row_bytes(cells):
    return b"\x1f".join(c.encode("utf-8") for c in cells) + b"\x1e"


def subset_digest(cols, rows, include_idx):
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef Py_ssize_t k, m = len(include_idx)
    cdef list inc = [int(i) for i in include_idx]
    cdef bytes header
    cdef const char *hbuf
    try:
        EVP_DigestInit_ex(ctx, EVP_sha256(), NULL)
        header = grid_header([cols[i] for i in inc], len(rows))
        hbuf = header
        EVP_DigestUpdate(ctx, hbuf, <size_t>len(header))
        for row in rows:
            for k in range(m):
                if k > 0:
                    _update_byte(ctx, _US)
                _update_str(ctx, row[inc[k]])
            _update_byte(ctx, _RS)
        return _final_hex(ctx)
    finally:
        EVP_MD_CTX_free(ctx)


def column_digest(rows, col_index):
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef Py_ssize_t j = col_index
    try:
        EVP_DigestInit_ex(ctx, EVP_sha256(), NULL)
        for row in rows:
            _update_str(ctx, row[j])
            _update_byte(ctx, _RS)
        return _final_hex(ctx)
    finally:
        EVP_MD_CTX_free(ctx)


def row_digest(cells):
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef Py_ssize_t k, m = len(cells)
    try:
        EVP_DigestInit_ex(ctx, EVP_sha256(), NULL)
        for k in range(m):
            if k > 0:
                _update_byte(ctx, _US)
            _update_str(ctx, cells[k])
        _update_byte(ctx, _RS)
        return _final_hex(ctx)
    finally:
        EVP_MD_CTX_free(ctx)


def column_digests(rows, n_cols):
    cdef Py_ssize_t j, n = n_cols
    cdef EVP_MD_CTX **ctxs = <EVP_MD_CTX **>malloc(n * sizeof(EVP_MD_CTX *))
    if ctxs == NULL:
        raise MemoryError()
    for j in range(n):
        ctxs[j] = EVP_MD_CTX_new()
        EVP_DigestInit_ex(ctxs[j], EVP_sha256(), NULL)
    try:
        for row in rows:
            for j in range(n):
                _update_str(ctxs[j], row[j])
                _update_byte(ctxs[j], _RS)
        return [_final_hex(ctxs[j]) for j in range(n)]
    finally:
        for j in range(n):
            EVP_MD_CTX_free(ctxs[j])
        free(ctxs)


def row_digests(rows):
    cdef EVP_MD_CTX *ctx = EVP_MD_CTX_new()
    cdef Py_ssize_t k, m
    cdef list out = []
    try:
        for row in rows:
            EVP_DigestInit_ex(ctx, EVP_sha256(), NULL)
            m = len(row)
            for k in range(m):
                if k > 0:
                    _update_byte(ctx, _US)
                _update_str(ctx, row[k])
            _update_byte(ctx, _RS)
            out.append(_final_hex(ctx))
        return out
    finally:
        EVP_MD_CTX_free(ctx)
