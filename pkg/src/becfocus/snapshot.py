"""Binary field snapshots.

Layout (all little-endian)::

    offset  size  content
    0       8     magic b"BECSNAP1"
    8       8     uint64 format version (1)
    16      24    int64 nx, ny, nz
    40      24    float64 dx, dy, dz [m]
    64      ...   complex128 samples (real, imag interleaved), x fastest

The grid is reconstructed as cell-centred with extents ``n * d``.
"""

from __future__ import annotations

import struct

import numpy as np

from .gpe.grid import Grid3D
from .gpe.state import Wavefunction

MAGIC = b"BECSNAP1"
VERSION = 1
_HEADER = struct.Struct("<8sQ3q3d")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, wf: Wavefunction) -> None:
    g = wf.grid
    header = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.nz, g.dx, g.dy, g.dz)
    data = np.asarray(wf.psi, dtype="<c16").ravel(order="F")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path, *, max_points: int | None = None) -> Wavefunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("file shorter than the snapshot header")
    magic, version, nx, ny, nz, dx, dy, dz = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    count = nx * ny * nz
    if len(raw) != _HEADER.size + 16 * count:
        raise SnapshotFormatError(f"payload holds {(len(raw) - _HEADER.size) // 16} samples, header says {count}")
    kw = {"max_points": max_points} if max_points else {}
    grid = Grid3D(nx, ny, nz, nx * dx, ny * dy, nz * dz, **kw)
    psi = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape((nx, ny, nz), order="F")
    return Wavefunction(grid, psi.astype(complex))
