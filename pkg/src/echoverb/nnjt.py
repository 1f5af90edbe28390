"""NNJT tensor container: the weight/feature exchange format.

Tensor record layout: magic ``NNJT`` (4 bytes), version u8 = 1, dtype
u8 = 0 (float32 little-endian), ndim u8, ndim x u32 LE dims, then the
row-major payload.  An archive is a u32 LE tensor count followed by,
per tensor, a u16 LE name length, the UTF-8 name and a tensor record.
"""

import struct

import numpy as np

from .errors import InvalidInput

MAGIC = b"NNJT"
VERSION = 1
DTYPE_F32 = 0


def _pack_tensor(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
    return header + dims + arr.tobytes()


def _unpack_tensor(buf, offset):
    if buf[offset:offset + 4] != MAGIC:
        raise InvalidInput("bad tensor magic; not an NNJT record")
    version, dtype, ndim = struct.unpack_from("<BBB", buf, offset + 4)
    if version != VERSION:
        raise InvalidInput(f"unsupported NNJT version {version}")
    if dtype != DTYPE_F32:
        raise InvalidInput(f"unsupported NNJT dtype code {dtype}")
    offset += 7
    shape = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    offset += 4 * count
    return arr.reshape(shape).copy(), offset


def save_archive(path, tensors):
    """Write a dict of name -> float array to an NNJT archive."""
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(_pack_tensor(arr))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_archive(path):
    """Read an NNJT archive back into a dict of name -> float32 array."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4:
        raise InvalidInput(f"{path}: truncated NNJT archive")
    (count,) = struct.unpack_from("<I", buf, 0)
    offset = 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        tensors[name], offset = _unpack_tensor(buf, offset)
    return tensors
