"""File formats: RTKD binary arrays, 16-bit PGM images, CSV helpers."""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, NotRtkdError, UnsupportedDtypeError

MAGIC = b"RTKD"
VERSION = 1
DTYPE_F64 = 1
_HEADER = struct.Struct("<4sBBBB")


def write_array(path, array) -> None:
    a = np.ascontiguousarray(array, dtype="<f8")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F64, a.ndim, 0)
    dims = struct.pack(f"<{a.ndim}Q", *a.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(a.tobytes(order="C"))


def read_array(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise NotRtkdError(f"{path}: not an RTKD file")
    _, version, dtype, ndim, _pad = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise CorruptFileError(f"{path}: unsupported RTKD version {version}")
    if dtype != DTYPE_F64:
        raise UnsupportedDtypeError(f"{path}: dtype code {dtype} is not supported")
    dims_end = _HEADER.size + 8 * ndim
    if len(raw) < dims_end:
        raise CorruptFileError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", raw, _HEADER.size)
    count = int(np.prod(dims, dtype=np.uint64)) if ndim else 1
    if len(raw) - dims_end != 8 * count:
        raise CorruptFileError(
            f"{path}: payload has {len(raw) - dims_end} bytes, expected {8 * count}"
        )
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=dims_end)
    return data.reshape(dims).astype(np.float64)


def export_pgm(x, path) -> None:
    """Binary 16-bit PGM, values mapped linearly from [min, max] to [0, 65535]."""
    v = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("PGM export needs a 2D image")
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        samples = np.rint((v - lo) / (hi - lo) * 65535.0)
    else:
        samples = np.zeros_like(v)
    rows, cols = v.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(samples.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols).astype(np.int64)


def fmt(value) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(value, str):
        return value
    return f"{float(value):.17g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
