"""Binary tensor containers.

Single-tensor records: magic ``NVC1``, u32 little-endian rank, rank u64
little-endian extents, then the row-major payload as little-endian IEEE-754
float32. A sibling record type with magic ``NVC8`` carries a float64 payload
and is used only inside checkpoint/optimizer containers, where bit-exact
round-trips of the in-memory values are part of the contract.

Multi-tensor containers: magic ``NVCC``, u32 entry count, then per entry a
u32 name length, the UTF-8 name bytes, and a tensor record; after the entries
a u32 metadata length plus UTF-8 metadata text (key=value lines, may be empty).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import InputError

__all__ = [
    "write_tensor",
    "read_tensor",
    "save_tensor",
    "load_tensor",
    "save_container",
    "load_container",
]

_MAGIC_F32 = b"NVC1"
_MAGIC_F64 = b"NVC8"
_MAGIC_CONTAINER = b"NVCC"


def write_tensor(fh, arr: np.ndarray, dtype: str = "f4") -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if dtype == "f4":
        fh.write(_MAGIC_F32)
        payload = arr.astype("<f4")
    elif dtype == "f8":
        fh.write(_MAGIC_F64)
        payload = arr.astype("<f8")
    else:
        raise InputError(f"unsupported payload dtype {dtype!r}")
    fh.write(struct.pack("<I", arr.ndim))
    for extent in arr.shape:
        fh.write(struct.pack("<Q", extent))
    fh.write(np.ascontiguousarray(payload).tobytes())


def read_tensor(fh) -> np.ndarray:
    magic = fh.read(4)
    if magic == _MAGIC_F32:
        dt = "<f4"
    elif magic == _MAGIC_F64:
        dt = "<f8"
    else:
        raise InputError(f"bad tensor magic {magic!r}")
    (rank,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    itemsize = 4 if dt == "<f4" else 8
    raw = fh.read(count * itemsize)
    if len(raw) != count * itemsize:
        raise InputError("truncated tensor payload")
    arr = np.frombuffer(raw, dtype=dt).reshape(shape)
    return arr.astype(np.float64)


def save_tensor(path, arr: np.ndarray, dtype: str = "f4") -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, arr, dtype=dtype)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def save_container(path, tensors: dict[str, np.ndarray], meta: str = "", dtype: str = "f4") -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC_CONTAINER)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            write_tensor(fh, arr, dtype=dtype)
        mb = meta.encode("utf-8")
        fh.write(struct.pack("<I", len(mb)))
        fh.write(mb)


def load_container(path) -> tuple[dict[str, np.ndarray], str]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC_CONTAINER:
            raise InputError(f"bad container magic {magic!r} in {path}")
        (count,) = struct.unpack("<I", fh.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", fh.read(4))
            name = fh.read(nlen).decode("utf-8")
            tensors[name] = read_tensor(fh)
        (mlen,) = struct.unpack("<I", fh.read(4))
        meta = fh.read(mlen).decode("utf-8")
    return tensors, meta
