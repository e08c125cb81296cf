"""Versioned binary container for checkpoints and windowed datasets.

Layout (little-endian)::

    magic    4 bytes   b"PDMS"
    version  uint32
    kind     uint8 length + ascii   ("denoiser", "windows", ...)
    ndims    uint32, then ndims x int64 dimension tuple
    narrays  uint32
    per array: uint16 name length, utf-8 name, uint8 ndim, ndim x uint32 shape,
               prod(shape) x float32 values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PDMS"
VERSION = 1


class ContainerError(ValueError):
    pass


def dumps(kind: str, dims, arrays: dict[str, np.ndarray]) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    kb = kind.encode("ascii")
    out += struct.pack("<B", len(kb)) + kb
    out += struct.pack("<I", len(dims))
    out += struct.pack(f"<{len(dims)}q", *[int(v) for v in dims])
    out += struct.pack("<I", len(arrays))
    for name, arr in arrays.items():
        nb = name.encode("utf-8")
        a = np.asarray(arr)
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<B", a.ndim)
        out += struct.pack(f"<{a.ndim}I", *a.shape)
        out += a.astype("<f4").tobytes(order="C")
    return bytes(out)


def loads(buf: bytes) -> tuple[str, tuple[int, ...], dict[str, np.ndarray]]:
    try:
        return _loads(buf)
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        if isinstance(exc, ContainerError):
            raise
        raise ContainerError(f"truncated or corrupt container: {exc}") from None


def _loads(buf: bytes):
    if buf[:4] != MAGIC:
        raise ContainerError("bad magic: not a PDMS container")
    pos = 4
    (version,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (klen,) = struct.unpack_from("<B", buf, pos)
    pos += 1
    kind = buf[pos:pos + klen].decode("ascii")
    pos += klen
    (nd,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    dims = struct.unpack_from(f"<{nd}q", buf, pos)
    pos += 8 * nd
    (na,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    arrays = {}
    for _ in range(na):
        (nl,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + nl].decode("utf-8")
        pos += nl
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * count
    if pos != len(buf):
        raise ContainerError("trailing bytes after last array")
    return kind, tuple(dims), arrays


def save(path, kind: str, dims, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(kind, dims, arrays))


def load(path) -> tuple[str, tuple[int, ...], dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())


# --------------------------------------------------------------------------
# typed helpers
# --------------------------------------------------------------------------

def save_denoiser(path, params) -> None:
    dims = params.dims + tuple(params.dilations)
    arrays = dict(params.arrays)
    arrays["block_enabled"] = np.asarray(params.block_enabled, dtype=np.float32)
    save(path, "denoiser", dims, arrays)


def load_denoiser(path):
    from .denoiser import DenoiserParams

    kind, dims, arrays = load(path)
    if kind != "denoiser":
        raise ContainerError(f"{path}: expected a denoiser checkpoint, found {kind!r}")
    l, d, h, R, e, B, T = dims[:7]
    enabled = [bool(v) for v in arrays.pop("block_enabled")]
    return DenoiserParams(l, d, h, R, e, B, T, tuple(dims[7:]), arrays, enabled)


def save_windows(path, windows) -> None:
    """Windows stacked as one (N, l, d) array plus (N, 3) metadata rows (bearing, index, faulty)."""
    if windows:
        values = np.stack([w.values for w in windows])
    else:
        values = np.zeros((0, 0, 0))
    meta = np.array([[w.bearing_id, w.window_index, int(w.is_faulty)] for w in windows], dtype=np.float32).reshape(-1, 3)
    save(path, "windows", values.shape, {"values": values, "meta": meta})


def load_windows(path):
    from .data_ingest import SampleWindow

    kind, _, arrays = load(path)
    if kind != "windows":
        raise ContainerError(f"{path}: expected a windows container, found {kind!r}")
    vals = arrays["values"].astype(np.float64)
    return [SampleWindow(vals[i], int(m[0]), int(m[1]), bool(m[2])) for i, m in enumerate(arrays["meta"])]
