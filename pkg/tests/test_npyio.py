import numpy as np
import pytest

from segqc.errors import FormatError
from segqc.npyio import read_npy, write_npy


def test_round_trip_float32(tmp_path, rng):
    path = tmp_path / "a.npy"
    for _ in range(20):
        arr = rng.random((5, 7, 3)).astype(np.float32)
        write_npy(path, arr)
        back = read_npy(path)
        assert back.dtype == np.float32
        assert arr.tobytes() == back.tobytes()


def test_round_trip_uint16(tmp_path, rng):
    path = tmp_path / "m.npy"
    arr = rng.integers(0, 60000, (9, 4)).astype(np.uint16)
    write_npy(path, arr)
    back = read_npy(path)
    assert back.dtype == np.uint16
    assert np.array_equal(arr, back)


def test_numpy_can_read_our_files(tmp_path, rng):
    path = tmp_path / "x.npy"
    arr = rng.random((3, 4)).astype(np.float32)
    write_npy(path, arr)
    assert np.array_equal(np.load(path), arr)


def test_we_can_read_numpy_files(tmp_path, rng):
    path = tmp_path / "y.npy"
    arr = rng.random((2, 6, 2)).astype(np.float32)
    np.save(path, arr)
    assert np.array_equal(read_npy(path), arr)


def test_read_only_result(tmp_path):
    path = tmp_path / "z.npy"
    write_npy(path, np.zeros((2, 2), np.float32))
    back = read_npy(path)
    with pytest.raises(ValueError):
        back[0, 0] = 1.0


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.npy"
    path.write_bytes(b"NOTNPY" + b"\x00" * 64)
    with pytest.raises(FormatError, match="magic"):
        read_npy(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "v2.npy"
    path.write_bytes(b"\x93NUMPY" + bytes([2, 0]) + b"\x00" * 64)
    with pytest.raises(FormatError, match="version"):
        read_npy(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.npy"
    write_npy(path, np.zeros((4, 4), np.float32))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="truncated"):
        read_npy(path)


def test_wrong_dtype_rejected(tmp_path):
    path = tmp_path / "f64.npy"
    np.save(path, np.zeros((2, 2), np.float64))
    with pytest.raises(FormatError, match="dtype"):
        read_npy(path)


def test_fortran_order_rejected(tmp_path):
    path = tmp_path / "f.npy"
    np.save(path, np.asfortranarray(np.zeros((3, 2), np.float32)))
    with pytest.raises(FormatError, match="Fortran"):
        read_npy(path)


def test_expected_descr_mismatch(tmp_path):
    path = tmp_path / "u.npy"
    write_npy(path, np.zeros((2, 2), np.uint16))
    with pytest.raises(FormatError, match="expected"):
        read_npy(path, expect_descr="<f4")


def test_malformed_header_dict(tmp_path):
    path = tmp_path / "h.npy"
    header = b"{'descr': '<f4', 'fortran_order': False"  # no closing brace
    pad = (64 - (10 + len(header) + 1) % 64) % 64
    blob = b"\x93NUMPY" + bytes([1, 0]) + (len(header) + pad + 1).to_bytes(2, "little")
    blob += header + b" " * pad + b"\n"
    path.write_bytes(blob)
    with pytest.raises(FormatError, match="malformed"):
        read_npy(path)
