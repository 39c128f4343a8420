"""
Explicit finite differences for the diffusion on positions and orientations

    dW/dt = D33 (n . grad)^2 W + D44 Laplace-Beltrami W,

used as an independent reference for the analytic kernel and the convolution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .convolution import FodField, KernelTable, delta_field, shift_twist_convolve
from .kernel import DiffusionParams
from .sphere import GridSpec, SphereSampling

SAFETY = 0.9


@dataclass(frozen=True, eq=False)
class LbOperator:
    """Discrete Laplace-Beltrami operator L = M^-1 C on a sphere sampling."""

    matrix: sp.csr_matrix
    stiffness: sp.csr_matrix
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_dense", self.matrix.toarray())

    def apply(self, f: np.ndarray) -> np.ndarray:
        """L applied along the last (orientation) axis of ``f``."""
        return f @ self._dense.T

    def max_eigenvalue(self, iterations: int = 2000, rtol: float = 1e-12) -> float:
        """Largest |eigenvalue|, by power iteration in the weighted inner product."""
        n = len(self.weights)
        x = np.cos(1.0 + 2.0 * np.arange(n)) + 0.5 * (-1.0) ** np.arange(n)
        x -= (x @ self.weights) / self.weights.sum()
        lam = 0.0
        for _ in range(iterations):
            y = -self.apply(x)
            new = (x * self.weights) @ y / ((x * self.weights) @ x)
            x = y / np.sqrt((y * self.weights) @ y)
            if abs(new - lam) <= rtol * abs(new):
                lam = new
                break
            lam = new
        return float(lam)

    def max_diagonal(self) -> float:
        return float(np.max(-self.matrix.diagonal()))


def build_lb_operator(s: SphereSampling) -> LbOperator:
    """
    Cotangent Laplacian of the sampling's triangle mesh divided by the Voronoi
    weights. Rows sum to zero and the operator is self-adjoint for the
    weighted inner product <f, g> = sum_i w_i f_i g_i.
    """
    if s.faces is None:
        raise ValueError("sphere sampling has no mesh connectivity")
    P, F = s.points, s.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = F[:, (k + 1) % 3], F[:, (k + 2) % 3], F[:, k]
        u, v = P[i] - P[o], P[j] - P[o]
        cot = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        rows += [i, j]
        cols += [j, i]
        vals += [0.5 * cot, 0.5 * cot]
    n = len(P)
    C = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    C = C - sp.diags(np.asarray(C.sum(axis=1)).ravel())
    L = sp.diags(1.0 / s.weights) @ C
    return LbOperator(sp.csr_matrix(L), sp.csr_matrix(C), s.weights)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    steps: int
    boundary: str = "periodic"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.steps < 0:
            raise ValueError(f"number of steps must be >= 0, got {self.steps}")
        if self.boundary not in ("zero", "periodic"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")


def max_time_step(p: DiffusionParams, spacing: float, lb: LbOperator) -> float:
    """
    Largest admissible forward Euler step. Besides the separate spatial and
    angular bounds, the combined diagonal of the update must stay
    nonnegative so that the scheme is monotone.
    """
    spatial = spacing**2 / (2 * 3 * p.d33)
    angular = 1.0 / (p.d44 * lb.max_eigenvalue())
    monotone = 1.0 / (2 * p.d33 / spacing**2 + p.d44 * lb.max_diagonal())
    return SAFETY * min(spatial, angular, monotone)


def auto_config(p: DiffusionParams, spacing: float, lb: LbOperator,
                boundary: str = "periodic") -> EvolutionConfig:
    """Fewest equal steps of admissible size reaching time p.t."""
    steps = max(1, math.ceil(p.t / max_time_step(p, spacing, lb) - 1e-12))
    return EvolutionConfig(p.t / steps, steps, boundary)


def _line_stencil(n: np.ndarray) -> dict[tuple[int, int, int], float]:
    """
    Voxel offsets and weights of u(y + n) + u(y - n) - 2 u(y), with the
    off-grid samples trilinearly interpolated (n in voxel units, |n| <= 1).
    """
    stencil: dict[tuple[int, int, int], float] = {(0, 0, 0): -2.0}
    for d in (n, -n):
        base = np.floor(d).astype(int)
        frac = d - base
        for corner in itertools.product((0, 1), repeat=3):
            weight = np.prod([f if c else 1.0 - f for c, f in zip(corner, frac)])
            if weight == 0.0:
                continue
            key = tuple(int(b + c) for b, c in zip(base, corner))
            stencil[key] = stencil.get(key, 0.0) + float(weight)
    return stencil


class _SpatialOperator:
    """(n_i . grad)^2 for every orientation i, as 27 shifted copies of the field."""

    def __init__(self, sphere: SphereSampling, spacing: float):
        offsets = list(itertools.product((-1, 0, 1), repeat=3))
        index = {o: k for k, o in enumerate(offsets)}
        weights = np.zeros((27, len(sphere)))
        for i, n in enumerate(sphere.points):
            for o, w in _line_stencil(n).items():
                weights[index[o], i] += w
        keep = np.any(weights != 0.0, axis=1)
        self.offsets = [o for o, k in zip(offsets, keep) if k]
        self.weights = weights[keep] / spacing**2

    def __call__(self, u: np.ndarray, boundary: str) -> np.ndarray:
        out = np.zeros_like(u)
        if boundary == "zero":
            padded = np.pad(u, [(1, 1)] * 3 + [(0, 0)])
            nx, ny, nz = u.shape[:3]
        for o, w in zip(self.offsets, self.weights):
            if boundary == "periodic":
                shifted = np.roll(u, shift=(-o[0], -o[1], -o[2]), axis=(0, 1, 2))
            else:
                shifted = padded[1 + o[0]:1 + o[0] + nx, 1 + o[1]:1 + o[1] + ny,
                                 1 + o[2]:1 + o[2] + nz]
            out += shifted * w
        return out


def evolve(u0: FodField, p: DiffusionParams, cfg: EvolutionConfig,
           lb: LbOperator | None = None) -> FodField:
    """Forward Euler evolution of ``u0`` up to time p.t."""
    if lb is None:
        lb = build_lb_operator(u0.sphere)
    if not math.isclose(cfg.steps * cfg.dt, p.t, rel_tol=1e-9):
        raise ValueError(f"steps * dt = {cfg.steps * cfg.dt} does not reach t = {p.t}")
    dt_max = max_time_step(p, u0.grid.spacing, lb)
    if cfg.dt > dt_max * (1 + 1e-12):
        raise ValueError(f"time step {cfg.dt} exceeds the stability bound {dt_max}")
    spatial = _SpatialOperator(u0.sphere, u0.grid.spacing)
    u = u0.values.copy()
    for _ in range(cfg.steps):
        u = u + cfg.dt * (p.d33 * spatial(u, cfg.boundary) + p.d44 * lb.apply(u))
    return u0.with_values(u)


def impulse_response(p: DiffusionParams, grid: GridSpec, sphere: SphereSampling,
                     cfg: EvolutionConfig | None = None, index: int | None = None,
                     lb: LbOperator | None = None) -> FodField:
    """
    Evolution of a unit-mass delta at the central voxel and orientation
    ``index`` (default: the sample nearest e_z).
    """
    if lb is None:
        lb = build_lb_operator(sphere)
    if cfg is None:
        cfg = auto_config(p, grid.spacing, lb)
    if index is None:
        index = sphere.nearest([0.0, 0.0, 1.0])
    return evolve(delta_field(grid, sphere, index=index), p, cfg, lb)


def table_from_impulse_responses(p: DiffusionParams, grid: GridSpec, sphere: SphereSampling,
                                 cfg: EvolutionConfig | None = None,
                                 lb: LbOperator | None = None) -> KernelTable:
    """
    Kernel table of the discrete evolution, one impulse response per source
    orientation, on a cubic grid of odd side 2r + 1.
    """
    side = grid.dims[0]
    if grid.dims != (side,) * 3 or side % 2 == 0:
        raise ValueError("impulse responses need a cubic grid with odd side length")
    if lb is None:
        lb = build_lb_operator(sphere)
    if cfg is None:
        cfg = auto_config(p, grid.spacing, lb)
    n = len(sphere)
    values = np.empty((side**3, n, n))
    for j in range(n):
        response = impulse_response(p, grid, sphere, cfg, j, lb)
        values[:, :, j] = response.values.reshape(side**3, n) * grid.voxel_volume
    mass = np.einsum("oij,i->j", values, sphere.weights)
    return KernelTable(side // 2, sphere, grid.spacing, values, mass)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||."""
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(np.ravel(a), np.ravel(b))[0, 1])


def isolated_impulse_response(p: DiffusionParams, radius: int, sphere: SphereSampling,
                              spacing: float = 1.0, cfg: EvolutionConfig | None = None,
                              index: int | None = None,
                              lb: LbOperator | None = None) -> np.ndarray:
    """
    Impulse response on the cube [-radius, radius]^3 as on an unbounded grid.

    The explicit stencil spreads one voxel per step, so a zero boundary placed
    ``steps`` voxels beyond the cube cannot reach it. Returned as an array of
    shape (2r+1, 2r+1, 2r+1, N) scaled to kernel table units (times voxel
    volume).
    """
    if lb is None:
        lb = build_lb_operator(sphere)
    if cfg is None:
        cfg = auto_config(p, spacing, lb, boundary="zero")
    side = 2 * (radius + cfg.steps) + 1
    grid = GridSpec((side,) * 3, spacing)
    response = impulse_response(p, grid, sphere, cfg, index, lb).values
    keep = slice(cfg.steps, cfg.steps + 2 * radius + 1)
    return response[keep, keep, keep] * grid.voxel_volume


def compare_with_table(table: KernelTable, p: DiffusionParams,
                       cfg: EvolutionConfig | None = None,
                       lb: LbOperator | None = None) -> dict[str, float]:
    """
    Pearson correlation and relative L2 distance between the column of
    ``table`` for the source orientation nearest e_z and the PDE impulse
    response of that orientation on the same offsets.
    """
    index = table.sphere.nearest([0.0, 0.0, 1.0])
    pde = isolated_impulse_response(p, table.radius, table.sphere, table.spacing, cfg, index, lb)
    analytic = table.column(index)
    return {"pearson": pearson(analytic, pde), "relative_l2": relative_l2(analytic, pde)}


def consistency_residual(p: DiffusionParams, side: int, sphere: SphereSampling,
                         spacing: float = 1.0, cfg: EvolutionConfig | None = None,
                         lb: LbOperator | None = None, seed: int = 0) -> float:
    """
    Relative L2 difference between evolving a random field and convolving it
    with the table of impulse responses, both on the same periodic grid. By
    linearity and translation invariance of the discrete evolution the two
    agree up to rounding.
    """
    if lb is None:
        lb = build_lb_operator(sphere)
    if cfg is None:
        cfg = auto_config(p, spacing, lb, boundary="periodic")
    if cfg.boundary != "periodic":
        raise ValueError("the consistency check needs a periodic grid")
    grid = GridSpec((side,) * 3, spacing)
    rng = np.random.default_rng(seed)
    u = FodField(grid, sphere, rng.random(grid.dims + (len(sphere),)))
    table = table_from_impulse_responses(p, grid, sphere, cfg, lb)
    direct = evolve(u, p, cfg, lb).values
    via_table = shift_twist_convolve(table, u, boundary="periodic").values
    return relative_l2(via_table, direct)
