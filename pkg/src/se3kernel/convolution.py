"""
Discrete shift-twist convolution of orientation fields on a voxel grid times a
sphere sampling.

A kernel table holds k(offset, n_target, n_source) for all integer voxel
offsets in [-r, r]^3, and the convolution is

    W(y, n_i) = sum_{y'} sum_j K(y - y', i, j) U(y', n_j) w_j

with w_j the quadrature weights of the sphere sampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kernel import DiffusionParams, Section, integer_offsets, kernel_two_point
from .sphere import GridSpec, SphereSampling

log = logging.getLogger(__name__)

DEFAULT_RADIUS_CAP = 5


@dataclass(frozen=True, eq=False)
class FodField:
    """Nonnegative field on grid x sphere, values of shape (nx, ny, nz, N)."""

    grid: GridSpec
    sphere: SphereSampling
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = self.grid.dims + (len(self.sphere),)
        if values.shape != expected:
            raise ValueError(f"field shape {values.shape} does not match grid x sphere {expected}")
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        """Integral over positions and orientations."""
        return float((self.values @ self.sphere.weights).sum() * self.grid.voxel_volume)

    def with_values(self, values: np.ndarray) -> FodField:
        return FodField(self.grid, self.sphere, values)


def delta_field(grid: GridSpec, sphere: SphereSampling, voxel=None, index: int = 0,
                value: float | None = None) -> FodField:
    """Discrete delta of unit mass at one voxel and one orientation."""
    voxel = grid.center if voxel is None else tuple(voxel)
    values = np.zeros(grid.dims + (len(sphere),))
    if value is None:
        value = 1.0 / (grid.voxel_volume * sphere.weights[index])
    values[voxel + (index,)] = value
    return FodField(grid, sphere, values)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """
    Tabulated kernel: ``values[o, i, j]`` for offset index o (see
    :func:`integer_offsets`), target orientation i and source orientation j.

    ``column_mass`` is the integral of each source column before normalisation
    and ``mass`` its mean.
    """

    radius: int
    sphere: SphereSampling
    spacing: float
    values: np.ndarray
    column_mass: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.mean(self.column_mass))

    @property
    def offsets(self) -> np.ndarray:
        return integer_offsets(self.radius).astype(int)

    def column_sums(self) -> np.ndarray:
        """sum_o sum_i values[o, i, j] w_i, one per source orientation j."""
        return np.einsum("oij,i->j", self.values, self.sphere.weights)

    def row_sums(self) -> np.ndarray:
        return np.einsum("oij,j->i", self.values, self.sphere.weights)

    def column(self, j: int) -> np.ndarray:
        """Source column j as an array of shape (2r+1, 2r+1, 2r+1, N)."""
        side = 2 * self.radius + 1
        return self.values[:, :, j].reshape(side, side, side, -1)

    @classmethod
    def identity(cls, sphere: SphereSampling, spacing: float = 1.0, radius: int = 1) -> KernelTable:
        """Table whose convolution returns its input unchanged."""
        side = 2 * radius + 1
        values = np.zeros((side**3, len(sphere), len(sphere)))
        center = side**3 // 2
        w = sphere.weights
        inv = 1.0 / w
        # nudge 1/w by an ulp where needed so that (1/w) * w is exactly 1
        for _ in range(4):
            low = inv * w < 1.0
            high = inv * w > 1.0
            inv = np.where(low, np.nextafter(inv, np.inf), inv)
            inv = np.where(high, np.nextafter(inv, 0.0), inv)
        values[center] = np.diag(inv)
        return cls(radius, sphere, spacing, values, np.ones(len(sphere)))


def raw_kernel_table(p: DiffusionParams, section: Section, radius: int,
                     sphere: SphereSampling, spacing: float = 1.0) -> np.ndarray:
    """k(o * spacing, n_i, 0, n_j) for all offsets o and orientation pairs (i, j)."""
    y = integer_offsets(radius)[:, None, :] * spacing
    n = sphere.points
    raw = np.empty((len(y), len(n), len(n)))
    for j, nj in enumerate(n):
        raw[:, :, j] = kernel_two_point(y, n[None, :, :], 0.0, nj, p, section)
    return raw


def _balance(A: np.ndarray, w: np.ndarray, tol: float = 1e-14,
             max_iter: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """
    Scalings r, c > 0 such that diag(r) A diag(c) has unit weighted row and
    column sums: sum_j r_i A_ij c_j w_j = 1 = sum_i r_i A_ij c_j w_i.
    """
    if np.any(A.sum(axis=0) <= 0) or np.any(A.sum(axis=1) <= 0):
        raise ValueError("kernel table has an orientation with zero mass; "
                         "increase t or the radius")
    if np.allclose(A, A.T, rtol=1e-12, atol=0.0):
        # symmetric scaling d_i d_j keeps the table symmetric
        d = 1.0 / np.sqrt(A @ w)
        for _ in range(max_iter):
            d = np.sqrt(d / (A @ (d * w)))
            if np.max(np.abs(d * (A @ (d * w)) - 1.0)) < tol:
                break
        else:
            log.warning("kernel balancing stopped after %d iterations", max_iter)
        return d, d
    r = np.ones(len(w))
    c = 1.0 / (A.T @ (r * w))
    for _ in range(max_iter):
        r = 1.0 / (A @ (c * w))
        c = 1.0 / (A.T @ (r * w))
        if np.max(np.abs(r * (A @ (c * w)) - 1.0)) < tol:
            break
    else:
        log.warning("kernel balancing stopped after %d iterations", max_iter)
    return r, c


def build_kernel_table(p: DiffusionParams, section: Section, radius: int,
                       sphere: SphereSampling, spacing: float = 1.0,
                       normalize: str = "balanced") -> KernelTable:
    """
    Tabulate the analytic kernel on [-radius, radius]^3 x sphere x sphere.

    normalize:
        ``"balanced"`` (default) scales targets and sources so that both the
        total mass of every source column and the response to a constant
        field are 1, finishing with an exact per-source normalisation;
        ``"column"`` only normalises every source column to unit mass;
        ``"none"`` keeps the physical values k * voxel_volume.
    """
    if radius < 1:
        raise ValueError("kernel radius must be at least 1")
    w = sphere.weights
    table = raw_kernel_table(p, section, radius, sphere, spacing) * spacing**3
    column_mass = np.einsum("oij,i->j", table, w)
    if normalize == "balanced":
        r, c = _balance(table.sum(axis=0), w)
        table *= r[None, :, None] * c[None, None, :]
        table /= np.einsum("oij,i->j", table, w)[None, None, :]
    elif normalize == "column":
        table /= column_mass[None, None, :]
    elif normalize != "none":
        raise ValueError(f"unknown normalisation {normalize!r}")
    return KernelTable(radius, sphere, spacing, table, column_mass)


def default_radius(p: DiffusionParams, section: Section, sphere: SphereSampling,
                   spacing: float = 1.0, cap: int = DEFAULT_RADIUS_CAP,
                   tolerance: float = 0.01) -> int:
    """
    Smallest radius whose cube keeps all but ``tolerance`` of the kernel mass
    of every source column, measured against a cube two voxels wider than
    ``cap``; returns ``cap`` if none qualifies.
    """
    big = cap + 2
    raw = raw_kernel_table(p, section, big, sphere, spacing)
    per_offset = np.einsum("oij,i->oj", raw, sphere.weights)
    total = per_offset.sum(axis=0)
    reach = np.abs(integer_offsets(big)).max(axis=1)
    for r in range(1, cap + 1):
        kept = per_offset[reach <= r].sum(axis=0)
        if np.all(total - kept < tolerance * total):
            return r
    return cap


def _shifted(u: np.ndarray, offset, boundary: str, pad: int) -> np.ndarray:
    """u(y - offset) over the grid, for a field already padded by ``pad`` if zero boundary."""
    if boundary == "periodic":
        return np.roll(u, shift=tuple(offset), axis=(0, 1, 2))
    nx, ny, nz = (s - 2 * pad for s in u.shape[:3])
    ox, oy, oz = (pad - o for o in offset)
    return u[ox:ox + nx, oy:oy + ny, oz:oz + nz]


def shift_twist_convolve(k: KernelTable, u: FodField, boundary: str = "zero") -> FodField:
    """
    Convolve field ``u`` with kernel table ``k``.

    boundary is ``"zero"`` (field vanishes outside the grid) or ``"periodic"``.
    Contributions are accumulated offset by offset in table order, so the
    result does not depend on how the work is split.
    """
    if k.sphere != u.sphere:
        raise ValueError("kernel table and field use different sphere samplings")
    if not np.isclose(k.spacing, u.grid.spacing, rtol=1e-12, atol=0.0):
        raise ValueError(f"kernel spacing {k.spacing} differs from grid spacing {u.grid.spacing}")
    if boundary not in ("zero", "periodic"):
        raise ValueError(f"unknown boundary mode {boundary!r}")
    r = k.radius
    src = u.values
    if boundary == "zero":
        src = np.pad(src, [(r, r)] * 3 + [(0, 0)])
    w = k.sphere.weights
    out = np.zeros_like(u.values)
    for o, offset in enumerate(k.offsets):
        block = k.values[o]
        if not block.any():
            continue
        out += _shifted(src, offset, boundary, r) @ (block * w[None, :]).T
    return u.with_values(out)


def enhance(u: FodField, p: DiffusionParams, radius: int | None = None,
            section: Section = Section.NEW, boundary: str = "zero") -> FodField:
    """Scale-space enhancement of ``u``: convolution with the tabulated kernel."""
    if radius is None:
        radius = default_radius(p, section, u.sphere, u.grid.spacing)
    table = build_kernel_table(p, section, radius, u.sphere, u.grid.spacing)
    return shift_twist_convolve(table, u, boundary)
