"""Strict NPY v1.0 reader and writer.

Only the subset of the format used by this package is supported:
little-endian float32 / uint16 / uint32 payloads in C order. Keeping the
parser strict gives precise error messages for corrupt inputs and pins the
on-disk bytes, so write-then-read round trips are bit exact.
"""

from __future__ import annotations

import ast
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"\x93NUMPY"

SUPPORTED_DESCRS = {"<f4", "<u2", "<u4"}


def write_npy(path: str | Path, array: np.ndarray) -> None:
    """Write `array` as an NPY v1.0 file.

    The dtype must be one of float32, uint16 or uint32; the array is
    written little-endian in C order.
    """
    arr = np.ascontiguousarray(array)
    descr = {"float32": "<f4", "uint16": "<u2", "uint32": "<u4"}.get(arr.dtype.name)
    if descr is None:
        raise FormatError(f"unsupported dtype for NPY output: {arr.dtype}")
    shape = "(" + ", ".join(str(d) for d in arr.shape)
    shape += ",)" if arr.ndim == 1 else ")"
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape}, }}"
    # total of magic(6) + version(2) + header-length(2) + header must be a
    # multiple of 64, newline terminated
    base = len(MAGIC) + 2 + 2
    pad = 64 - (base + len(header) + 1) % 64
    header = header + " " * (pad % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes(order="C"))


def read_npy(path: str | Path, expect_descr: str | None = None) -> np.ndarray:
    """Read an NPY v1.0 file, returning a read-only array.

    `expect_descr` optionally pins the payload dtype (e.g. "<f4"); a
    mismatch raises FormatError.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != MAGIC:
            raise FormatError(f"{path}: not an NPY file (bad magic {magic!r})")
        version = fh.read(2)
        if len(version) < 2:
            raise FormatError(f"{path}: truncated NPY header")
        if version != bytes([1, 0]):
            raise FormatError(
                f"{path}: unsupported NPY version {version[0]}.{version[1]}, expected 1.0"
            )
        len_bytes = fh.read(2)
        if len(len_bytes) < 2:
            raise FormatError(f"{path}: truncated NPY header")
        header_len = int.from_bytes(len_bytes, "little")
        header = fh.read(header_len)
        if len(header) < header_len:
            raise FormatError(f"{path}: truncated NPY header")
        meta = _parse_header(header, path)
        descr, fortran_order, shape = meta
        if fortran_order:
            raise FormatError(f"{path}: Fortran-order arrays are not supported")
        if descr not in SUPPORTED_DESCRS:
            raise FormatError(
                f"{path}: unsupported dtype {descr!r}, expected one of {sorted(SUPPORTED_DESCRS)}"
            )
        if expect_descr is not None and descr != expect_descr:
            raise FormatError(f"{path}: dtype {descr!r} does not match expected {expect_descr!r}")
        dtype = np.dtype(descr)
        count = int(np.prod(shape)) if shape else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FormatError(
                f"{path}: payload truncated, expected {count * dtype.itemsize} bytes, "
                f"got {len(payload)}"
            )
        arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
        arr.flags.writeable = False
        return arr


def _parse_header(header: bytes, path: Path) -> tuple[str, bool, tuple[int, ...]]:
    try:
        text = header.decode("latin1")
        meta = ast.literal_eval(text.strip())
    except (SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: malformed NPY header: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: NPY header must contain descr/fortran_order/shape")
    descr = meta["descr"]
    fortran_order = meta["fortran_order"]
    shape = meta["shape"]
    if not isinstance(descr, str) or not isinstance(fortran_order, bool):
        raise FormatError(f"{path}: malformed NPY header fields")
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise FormatError(f"{path}: malformed NPY shape {shape!r}")
    return descr, fortran_order, shape
