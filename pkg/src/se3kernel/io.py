"""
Binary field and kernel files, and the plain text streamline format.

Binary layout (little-endian): a header

    magic (4 bytes) | version u32 | nx ny nz u32 | spacing f64 | sphere level u8

followed by float64 values with x varying fastest, then y, z and the
orientation axes. Fields use magic ``FODF``; kernel tables use ``FODK`` with
(nx, ny, nz) = (2r+1,)*3 and a target and a source orientation axis.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .convolution import FodField, KernelTable
from .fbc import Tractogram
from .sphere import GridSpec, icosphere

VERSION = 1
HEADER = struct.Struct("<4sI3IdB")
FIELD_MAGIC = b"FODF"
KERNEL_MAGIC = b"FODK"


class FormatError(ValueError):
    """Malformed input file."""


def _n_orientations(level: int) -> int:
    return 10 * 4**level + 2


def _write(path, magic: bytes, dims, spacing: float, level: int, values: np.ndarray) -> None:
    header = HEADER.pack(magic, VERSION, *dims, spacing, level)
    payload = np.asarray(values, dtype="<f8").ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def _read(path, magic: bytes, extra_axes: int):
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise FormatError(f"{path}: file too short for a header")
    got, version, nx, ny, nz, spacing, level = HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n = _n_orientations(level)
    shape = (nx, ny, nz) + (n,) * extra_axes
    count = int(np.prod(shape))
    if len(data) - HEADER.size != 8 * count:
        raise FormatError(f"{path}: payload has {len(data) - HEADER.size} bytes, "
                          f"expected {8 * count}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(shape, order="F")
    return (nx, ny, nz), spacing, level, values.astype(float)


def _level(sphere) -> int:
    if sphere.level is None:
        raise FormatError("only icosphere samplings can be stored")
    return sphere.level


def write_field(u: FodField, path) -> None:
    _write(path, FIELD_MAGIC, u.grid.dims, u.grid.spacing, _level(u.sphere), u.values)


def read_field(path) -> FodField:
    dims, spacing, level, values = _read(path, FIELD_MAGIC, 1)
    return FodField(GridSpec(dims, spacing), icosphere(level), values)


def write_kernel(k: KernelTable, path) -> None:
    side = 2 * k.radius + 1
    n = len(k.sphere)
    values = k.values.reshape(side, side, side, n, n)
    _write(path, KERNEL_MAGIC, (side,) * 3, k.spacing, _level(k.sphere), values)


def read_kernel(path) -> KernelTable:
    dims, spacing, level, values = _read(path, KERNEL_MAGIC, 2)
    side = dims[0]
    if dims != (side,) * 3 or side % 2 == 0:
        raise FormatError(f"{path}: kernel grid {dims} is not a cube of odd side")
    sphere = icosphere(level)
    values = values.reshape(side**3, len(sphere), len(sphere))
    mass = np.einsum("oij,i->j", values, sphere.weights)
    return KernelTable(side // 2, sphere, spacing, values, mass)


def parse_streamlines(lines) -> list[np.ndarray]:
    """Fibers from text lines of x1 y1 z1 x2 y2 z2 ...; blank and '#' lines are skipped."""
    fibers = []
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values = np.array([float(v) for v in text.split()])
        except ValueError as exc:
            raise FormatError(f"line {number}: {exc}") from None
        if len(values) % 3:
            raise FormatError(f"line {number}: {len(values)} numbers, not a multiple of 3")
        if len(values) < 6:
            raise FormatError(f"line {number}: a fiber needs at least two points")
        fibers.append(values.reshape(-1, 3))
    return fibers


def read_streamlines(path) -> list[np.ndarray]:
    with open(path) as fh:
        return parse_streamlines(fh)


def read_tractogram(path) -> Tractogram:
    fibers = read_streamlines(path)
    if not fibers:
        raise FormatError(f"{path}: no fibers")
    try:
        return Tractogram.from_point_lists(fibers)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_streamlines(fibers, path) -> None:
    """One fiber per line, full precision, so reading back is exact."""
    with open(path, "w") as fh:
        for f in fibers:
            points = getattr(f, "points", f)
            fh.write(" ".join(f"{v:.17g}" for v in np.ravel(points)) + "\n")


def write_tractogram(tr: Tractogram, path) -> None:
    write_streamlines(tr.fibers, path)
