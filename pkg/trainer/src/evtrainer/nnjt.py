"""NNJT tensor archive codec (trainer-side implementation).

Same wire format as the enhancement toolkit: tensor records carry the
magic ``NNJT``, version 1, float32 little-endian payloads; archives
prefix a u32 count and length-prefixed UTF-8 names.
"""

import struct

import numpy as np

MAGIC = b"NNJT"
VERSION = 1
DTYPE_F32 = 0


class FormatError(ValueError):
    pass


def _pack_tensor(arr):
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
    return header + dims + arr.tobytes()


def _unpack_tensor(buf, offset):
    if buf[offset:offset + 4] != MAGIC:
        raise FormatError("bad tensor magic; not an NNJT record")
    version, dtype, ndim = struct.unpack_from("<BBB", buf, offset + 4)
    if version != VERSION or dtype != DTYPE_F32:
        raise FormatError(f"unsupported NNJT record (v{version}, dtype {dtype})")
    offset += 7
    shape = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    offset += 4 * count
    return arr.reshape(shape).copy(), offset


def save_archive(path, tensors):
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(_pack_tensor(arr))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_archive(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4:
        raise FormatError(f"{path}: truncated NNJT archive")
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
