"""GPOT tensor container.

Byte layout (all integers little-endian)::

    offset  size        field
    0       4           magic b"GPOT"
    4       4           version, u32 = 1
    8       1           dtype code, u8 (1 = float64)
    9       1           rank, u8
    10      8 * rank    dims, u64 each
    ...     8 * prod    row-major float64 payload
    end-4   4           CRC32 of every preceding byte
"""

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ContainerError

MAGIC = b"GPOT"
VERSION = 1
DTYPE_F64 = 1
HEADER = struct.Struct("<4sIBB")


def encode(array):
    a = np.asarray(array, dtype="<f8")  # tobytes() is row-major; keeps rank 0
    if a.ndim > 255:
        raise ContainerError("rank exceeds 255")
    body = HEADER.pack(MAGIC, VERSION, DTYPE_F64, a.ndim)
    body += struct.pack(f"<{a.ndim}Q", *a.shape) + a.tobytes()
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode(buf, path=None):
    if len(buf) < HEADER.size + 4:
        raise ContainerError("truncated header", path, len(buf))
    magic, version, dtype, rank = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}", path, 0)
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}", path, 4)
    if dtype != DTYPE_F64:
        raise ContainerError(f"unsupported dtype code {dtype}", path, 8)
    off = HEADER.size
    if len(buf) < off + 8 * rank + 4:
        raise ContainerError("truncated dims", path, off)
    dims = struct.unpack_from(f"<{rank}Q", buf, off)
    off += 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = off + 8 * count + 4
    if len(buf) != expected:
        raise ContainerError(f"payload length mismatch: expected {8 * count} bytes "
                             f"for dims {list(dims)}, file has {len(buf) - off - 4}", path, off)
    (crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    actual = zlib.crc32(buf[: len(buf) - 4]) & 0xFFFFFFFF
    if crc != actual:
        raise ContainerError(f"CRC mismatch (stored {crc:08x}, computed {actual:08x})",
                             path, len(buf) - 4)
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.isfinite(data.ravel()))[0])
        raise ContainerError("non-finite payload value", path, off + 8 * bad)
    return data.astype(np.float64)


def write(path, array):
    path = Path(path)
    try:
        path.write_bytes(encode(array))
    except OSError as exc:
        raise ContainerError(f"cannot write: {exc.strerror}", path) from exc
    return path


def read(path):
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read: {exc.strerror}", path) from exc
    return decode(buf, path)


def crc_of(path):
    """Stored trailing CRC32 of a container file."""
    buf = Path(path).read_bytes()
    return struct.unpack_from("<I", buf, len(buf) - 4)[0]
