"""Canonical hashing kernels: frozen digests, backend equivalence."""

import hashlib
import random
import string

import pytest

from auditem import hashing
from auditem import _hashcore_py

# Digests frozen from an independent hashlib computation of the canonical
# byte framing (0x1f between cells, 0x1e after each row, header first).
FROZEN_1X1_SUBSET = "7e172215f80d088ddb8d23277777b513c99235e447b3c38f68c062c0d72b5781"
FROZEN_1X1_COLUMN = "dd547044bac1572a1df2028932d8f20c7e790e55e3a8e5f7727e453bc03ebba3"


def backends():
    return [hashing.load_backend(n) for n in hashing.available_backends()]


@pytest.fixture(params=hashing.available_backends())
def backend(request):
    return hashing.load_backend(request.param)


def test_both_backends_available():
    # The compiled extension must be built in this environment; the pure
    # fallback is always present.
    assert hashing.available_backends() == ["compiled", "python"]


def test_frozen_single_cell_digests(backend):
    assert backend.subset_digest(["c"], [["a"]], [0]) == FROZEN_1X1_SUBSET
    assert backend.column_digest([["a"]], 0) == FROZEN_1X1_COLUMN
    assert backend.row_digest(["a"]) == FROZEN_1X1_COLUMN


def test_sha256_hex_matches_hashlib(backend):
    for data in (b"", b"a", b"hello world", bytes(range(256))):
        assert backend.sha256_hex(data) == hashlib.sha256(data).hexdigest()


def test_subset_digest_matches_manual_framing(backend):
    cols = ["x", "y"]
    rows = [["1", "2"], ["3", "4"]]
    raw = b"2\x1fx\x1fy\x1e" + b"1\x1f2\x1e" + b"3\x1f4\x1e"
    assert backend.subset_digest(cols, rows, [0, 1]) == hashlib.sha256(raw).hexdigest()
    # Column subset: only column y, header names only y.
    raw_y = b"2\x1fy\x1e" + b"2\x1e" + b"4\x1e"
    assert backend.subset_digest(cols, rows, [1]) == hashlib.sha256(raw_y).hexdigest()


def test_column_and_row_digests_match_manual_framing(backend):
    rows = [["a", "bb"], ["c", "dd"]]
    col0 = hashlib.sha256(b"a\x1ec\x1e").hexdigest()
    col1 = hashlib.sha256(b"bb\x1edd\x1e").hexdigest()
    assert backend.column_digest(rows, 0) == col0
    assert backend.column_digest(rows, 1) == col1
    assert backend.column_digests(rows, 2) == [col0, col1]
    row0 = hashlib.sha256(b"a\x1fbb\x1e").hexdigest()
    row1 = hashlib.sha256(b"c\x1fdd\x1e").hexdigest()
    assert backend.row_digest(rows[0]) == row0
    assert backend.row_digests(rows) == [row0, row1]


def test_framing_distinguishes_cell_boundaries(backend):
    # "ab","c" and "a","bc" must hash differently in every kernel.
    assert backend.row_digest(["ab", "c"]) != backend.row_digest(["a", "bc"])
    assert backend.subset_digest(["p", "q"], [["ab", "c"]], [0, 1]) != \
        backend.subset_digest(["p", "q"], [["a", "bc"]], [0, 1])
    # Empty trailing cell is not the same as no cell.
    assert backend.row_digest(["a", ""]) != backend.row_digest(["a"])


def test_header_binds_row_count_and_names(backend):
    # Same cells, different declared schema -> different subset digest.
    one = backend.subset_digest(["a"], [["x"]], [0])
    other = backend.subset_digest(["b"], [["x"]], [0])
    assert one != other


def test_unicode_cells(backend):
    rows = [["héllo", "жизнь"], ["日本語", "ok"]]
    raw = "2\x1fu\x1fv\x1e" + "héllo\x1fжизнь\x1e" + "日本語\x1fok\x1e"
    expected = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    assert backend.subset_digest(["u", "v"], rows, [0, 1]) == expected


def test_backends_agree_on_random_grids():
    compiled = hashing.load_backend("compiled")
    rng = random.Random(42)
    alphabet = string.printable + "é日ж"
    for _ in range(20):
        n_cols = rng.randint(1, 8)
        n_rows = rng.randint(0, 30)
        cols = [f"c{j}" for j in range(n_cols)]
        rows = [
            ["".join(rng.choices(alphabet, k=rng.randint(0, 25)))
             for _ in range(n_cols)]
            for _ in range(n_rows)
        ]
        include = sorted(rng.sample(range(n_cols), rng.randint(1, n_cols)))
        assert compiled.subset_digest(cols, rows, include) == \
            _hashcore_py.subset_digest(cols, rows, include)
        assert compiled.column_digests(rows, n_cols) == \
            _hashcore_py.column_digests(rows, n_cols)
        assert compiled.row_digests(rows) == _hashcore_py.row_digests(rows)


def test_env_var_forces_pure_backend(monkeypatch):
    monkeypatch.setenv("AUDITEM_PURE_HASH", "1")
    assert hashing._select().IMPL == "python"
    monkeypatch.delenv("AUDITEM_PURE_HASH")
    assert hashing._select().IMPL == "compiled"


def test_unknown_backend_name_rejected():
    with pytest.raises(ValueError):
        hashing.load_backend("gpu")
