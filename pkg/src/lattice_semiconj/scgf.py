"""SCGF binary grid files.

Layout (little-endian): magic ``b"SCGF"``, ``u16`` version (1), ``u32 d``,
``u32 m``, ``d`` x ``u32`` resolutions, then the samples as ``f64`` in
row-major order over ``(*res, m)``.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .torusmap import GridFunction

MAGIC = b"SCGF"
VERSION = 1


def to_bytes(g: GridFunction) -> bytes:
    head = MAGIC + struct.pack("<HII", VERSION, g.d, g.m) + struct.pack(f"<{g.d}I", *g.res)
    return head + np.ascontiguousarray(g.data, dtype="<f8").tobytes(order="C")


def from_bytes(buf: bytes) -> GridFunction:
    if buf[:4] != MAGIC:
        raise ValueError("not an SCGF file (bad magic)")
    version, d, m = struct.unpack_from("<HII", buf, 4)
    if version != VERSION:
        raise ValueError(f"unsupported SCGF version {version}")
    off = 4 + struct.calcsize("<HII")
    res = struct.unpack_from(f"<{d}I", buf, off)
    off += 4 * d
    count = int(np.prod(res)) * m
    if len(buf) != off + 8 * count:
        raise ValueError(f"SCGF size mismatch: expected {off + 8 * count} bytes, got {len(buf)}")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(float)
    return GridFunction(data.reshape(*res, m))


def atomic_write(path: str | os.PathLike, payload: bytes | str) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = payload.encode() if isinstance(payload, str) else payload
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_scgf(path: str | os.PathLike, g: GridFunction) -> None:
    atomic_write(path, to_bytes(g))


def read_scgf(path: str | os.PathLike) -> GridFunction:
    return from_bytes(Path(path).read_bytes())
