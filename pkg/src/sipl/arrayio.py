"""Binary array container shared by datasets and policy dumps.

Record layout (all little-endian): magic ``SIPL`` (4 bytes), format
version u16, dtype code u8 (0=f64, 1=f32, 2=i32, 3=u8), rank u8, dims as
rank u32 values, then the raw C-order array data. A file may hold several
records back to back; readers consume records until end of file.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"SIPL"
VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f8"): 0,
    np.dtype("<f4"): 1,
    np.dtype("<i4"): 2,
    np.dtype("u1"): 3,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}
DTYPE_NAMES = {0: "f64", 1: "f32", 2: "i32", 3: "u8"}
NAME_CODES = {v: k for k, v in DTYPE_NAMES.items()}


class ContainerError(ValueError):
    """Malformed container bytes."""


def write_array(fh: BinaryIO, arr: np.ndarray) -> None:
    a = np.ascontiguousarray(arr)
    dt = a.dtype.newbyteorder("<") if a.dtype.byteorder == ">" else a.dtype
    if dt not in _DTYPE_CODES:
        raise ContainerError(f"unsupported dtype {arr.dtype}")
    a = a.astype(dt, copy=False)
    fh.write(MAGIC)
    fh.write(struct.pack("<HBB", VERSION, _DTYPE_CODES[dt], a.ndim))
    fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
    fh.write(a.tobytes(order="C"))


def read_array(fh: BinaryIO) -> np.ndarray | None:
    """Read one record; None at end of file."""
    head = fh.read(4)
    if not head:
        return None
    if head != MAGIC:
        raise ContainerError(f"bad magic {head!r}")
    version, code, rank = struct.unpack("<HBB", fh.read(4))
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if code not in _CODE_DTYPES:
        raise ContainerError(f"unknown dtype code {code}")
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    raw = fh.read(count * dtype.itemsize)
    if len(raw) != count * dtype.itemsize:
        raise ContainerError("truncated array data")
    return np.frombuffer(raw, dtype=dtype).reshape(dims).copy()


def save_arrays(path: str | Path, arrays: list[np.ndarray]) -> None:
    with open(path, "wb") as fh:
        for a in arrays:
            write_array(fh, a)


def load_arrays(path: str | Path) -> list[np.ndarray]:
    out = []
    with open(path, "rb") as fh:
        while (a := read_array(fh)) is not None:
            out.append(a)
    return out


def dtype_name(arr: np.ndarray) -> str:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    return DTYPE_NAMES[_DTYPE_CODES[dt]]


__all__ = [
    "MAGIC", "VERSION", "DTYPE_NAMES", "NAME_CODES", "ContainerError",
    "write_array", "read_array", "save_arrays", "load_arrays", "dtype_name",
]
