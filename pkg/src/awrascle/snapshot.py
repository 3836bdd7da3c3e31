"""Binary field snapshots and PGM heatmaps.

Snapshot layout (all little-endian)::

    b"AWRS"  u32 version  u32 dim  u32[dim] N  f64[dim] L  u32 components  f64 time
    f64 values, row-major over the lattice, components interleaved per node

In memory a field keeps the package convention: shape ``torus.shape`` for a
scalar and ``(C, *torus.shape)`` for ``C`` components.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

from .grid import Torus, check_finite

__all__ = ["MAGIC", "VERSION", "SnapshotError", "Snapshot", "write_snapshot", "read_snapshot",
           "heatmap_slice", "write_pgm", "read_pgm"]

MAGIC = b"AWRS"
VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    torus: Torus
    field: np.ndarray
    time: float
    version: int = VERSION

    @property
    def components(self):
        return 1 if self.field.ndim == self.torus.dim else self.field.shape[0]

    def header(self):
        return {
            "version": self.version,
            "dim": self.torus.dim,
            "N": list(self.torus.sizes),
            "L": list(self.torus.lengths),
            "components": self.components,
            "time": self.time,
        }


def write_snapshot(path, torus, field, time=0.0):
    f = check_finite(np.asarray(field, dtype=float), "snapshot field")
    if f.shape == torus.shape:
        comps, interleaved = 1, f[..., None]
    elif f.shape[1:] == torus.shape:
        comps, interleaved = f.shape[0], np.moveaxis(f, 0, -1)
    else:
        raise SnapshotError(f"field shape {f.shape} does not match lattice {torus.shape}")
    d = torus.dim
    head = MAGIC + struct.pack(f"<II{d}I{d}dId", VERSION, d, *torus.sizes, *torus.lengths, comps, float(time))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(interleaved, dtype="<f8").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise SnapshotError(f"{path}: not a field snapshot (bad magic {buf[:4]!r})")
    try:
        version, d = struct.unpack_from("<II", buf, 4)
        if version != VERSION:
            raise SnapshotError(f"{path}: unsupported snapshot version {version}")
        if not 1 <= d <= 3:
            raise SnapshotError(f"{path}: invalid dimension {d}")
        off = 12
        sizes = struct.unpack_from(f"<{d}I", buf, off)
        off += 4 * d
        lengths = struct.unpack_from(f"<{d}d", buf, off)
        off += 8 * d
        comps, time = struct.unpack_from("<Id", buf, off)
        off += 12
    except struct.error as exc:
        raise SnapshotError(f"{path}: truncated header") from exc
    torus = Torus(sizes, lengths)
    count = torus.n_nodes * comps
    if len(buf) - off != 8 * count:
        raise SnapshotError(f"{path}: expected {count} values, found {(len(buf) - off) // 8}")
    vals = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(torus.shape + (comps,))
    field = vals[..., 0].copy() if comps == 1 else np.moveaxis(vals, -1, 0).copy()
    return Snapshot(torus, field, float(time), version)


def heatmap_slice(snapshot, axis=0, index=0):
    """2D slice of component 0: the whole plane in 2D, ``axis=index`` in 3D."""
    f = snapshot.field if snapshot.components == 1 else snapshot.field[0]
    d = snapshot.torus.dim
    if d == 1:
        raise SnapshotError("heatmaps need a 2D or 3D field")
    if d == 2:
        return f
    if not 0 <= axis < 3:
        raise SnapshotError(f"slice axis must be 0, 1 or 2, got {axis}")
    n = snapshot.torus.sizes[axis]
    if not 0 <= index < n:
        raise SnapshotError(f"slice index {index} outside 0..{n - 1}")
    return np.take(f, index, axis=axis)


def write_pgm(path, image):
    """8-bit binary PGM with linear min-max scaling (a flat image maps to 0)."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros(img.shape) if hi == lo else (img - lo) / (hi - lo) * 255.0
    pix = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    rows, cols = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", buf)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    return np.frombuffer(buf, dtype=np.uint8, count=rows * cols, offset=m.end()).reshape(rows, cols)
