"""
Analytic Gaussian estimates of the hypo-elliptic heat kernel on SE(3) and on
the space of positions and orientations R^3 x S^2.

The group kernel is a Gaussian in the weighted modulus of the SE(3) logarithm.
On the quotient it has to be evaluated at a representative rotation R_n with
R_n e_z = n; the free angle alpha of R_n = R_z(gamma) R_y(beta) R_z(alpha)
is fixed by a :class:`Section`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lie import POLE_TOLERANCE, RigidMotion, euler_zyz, orientation_to_beta_gamma, se3_log

E_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class DiffusionParams:
    """Spatial diffusivity d33, angular diffusivity d44 (= d55) and time t."""

    d33: float
    d44: float
    t: float

    def __post_init__(self):
        for name in ("d33", "d44", "t"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def prefactor(self) -> float:
        """Kernel value at the identity, 1 / (4 pi t^2 D33 D44)^2."""
        return 1.0 / (4.0 * np.pi * self.t**2 * self.d33 * self.d44) ** 2


class Section(enum.Enum):
    """Choice of the angle alpha in the representative rotation of n."""

    NEW = "new"    # alpha = -gamma, invariant under inversion
    ZERO = "zero"  # alpha = 0


def section_rotation(n: np.ndarray, section: Section = Section.NEW, y=None) -> np.ndarray:
    """
    Representative rotation R_n with R_n e_z = n for the given section.

    For the new section at n = -e_z every azimuth gives a different half-turn
    R_z(gamma) R_y(pi) R_z(-gamma). When the position y is passed, the half
    turn about the horizontal direction of y is used there, which keeps the
    kernel invariant under rotations about e_z and under inversion.
    """
    beta, gamma = orientation_to_beta_gamma(n)
    if section is Section.ZERO:
        return euler_zyz(gamma, beta, np.zeros_like(gamma))
    if y is not None:
        n = np.asarray(n, dtype=float)
        y = np.asarray(y, dtype=float)
        south = (np.hypot(n[..., 0], n[..., 1]) <= POLE_TOLERANCE) & (n[..., 2] < 0)
        if np.any(south):
            azimuth = np.arctan2(y[..., 1], y[..., 0]) + 0.5 * np.pi
            gamma = np.where(south, azimuth, gamma)
    return euler_zyz(gamma, beta, -gamma)


def weighted_modulus(c: np.ndarray, p: DiffusionParams) -> np.ndarray:
    """Smoothed anisotropic modulus of Lie coefficients c (..., 6)."""
    c = np.asarray(c, dtype=float)
    d33, d44 = p.d33, p.d44
    first = (c[..., 0] ** 2 + c[..., 1] ** 2) / (d33 * d44) + c[..., 5] ** 2 / d44
    second = c[..., 2] ** 2 / d33 + (c[..., 3] ** 2 + c[..., 4] ** 2) / d44
    return (first + second**2) ** 0.25


def kernel_log(g: RigidMotion, p: DiffusionParams) -> np.ndarray:
    """Gaussian estimate of the SE(3) kernel at g."""
    m = weighted_modulus(se3_log(g), p)
    return p.prefactor * np.exp(-(m**2) / (4.0 * p.t))


def kernel_quotient(y: np.ndarray, n: np.ndarray, p: DiffusionParams,
                    section: Section = Section.NEW) -> np.ndarray:
    """Kernel on R^3 x S^2 at position y and orientation n."""
    y = np.asarray(y, dtype=float)
    return kernel_log(RigidMotion(y, section_rotation(n, section, y)), p)


def kernel_two_point(y, n, y2, n2, p: DiffusionParams,
                     section: Section = Section.NEW) -> np.ndarray:
    """
    k(y, n, y2, n2) = p(R_n2^T (y - y2), R_n2^T n): the kernel centred at
    (y2, n2) evaluated at (y, n).
    """
    Rt = np.swapaxes(section_rotation(n2, section), -1, -2)
    dy = np.asarray(y, dtype=float) - np.asarray(y2, dtype=float)
    return kernel_quotient(np.einsum("...ij,...j->...i", Rt, dy),
                           np.einsum("...ij,...j->...i", Rt, n), p, section)


def integer_offsets(radius: int) -> np.ndarray:
    """All integer offsets of the cube [-radius, radius]^3, C order (z fastest)."""
    r = np.arange(-radius, radius + 1)
    return np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3).astype(float)


def asymmetry_sum(radius: int, sphere, p: DiffusionParams,
                  section: Section, spacing: float = 1.0) -> float:
    """
    Sum over the offsets y of the (2 radius + 1)^3 grid and the orientations n
    of ``sphere`` (a sampling or an (N, 3) array) of
    |k(y, n, 0, e_z) - k(0, e_z, y, n)|, which vanishes for a symmetric kernel.
    """
    y = integer_offsets(radius)[:, None, :] * spacing
    n = np.asarray(getattr(sphere, "points", sphere), dtype=float)[None, :, :]
    y, n = np.broadcast_arrays(y, n)
    forward = kernel_two_point(y, n, 0.0, E_Z, p, section)
    backward = kernel_two_point(0.0, E_Z, y, n, p, section)
    return float(np.abs(forward - backward).sum())
