"""
Rigid body motions SE(3): group product, ZYZ Euler charts and the
exponential / logarithm maps on SO(3) and SE(3).

All functions are vectorised over leading axes. Rotations are arrays of shape
(..., 3, 3), translations and rotation vectors (..., 3), Lie coefficients
(..., 6) ordered as (c1, c2, c3, c4, c5, c6) = (spatial, rotational).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Below this rotation angle the SE(3) log uses the Taylor series of
# 1 - (q/2) cot(q/2); the closed form has no significant digits left near 0.
SERIES_THRESHOLD = 1e-4

# Above this angle the rotation axis is read from the symmetric part of R,
# the antisymmetric part being O(pi - angle).
NEAR_PI_THRESHOLD = np.pi - 1e-2

POLE_TOLERANCE = 1e-13


class RigidMotion(NamedTuple):
    """Element g = (x, R) of SE(3), possibly batched over leading axes."""

    x: np.ndarray
    R: np.ndarray


def identity() -> RigidMotion:
    return RigidMotion(np.zeros(3), np.eye(3))


def compose(g: RigidMotion, h: RigidMotion) -> RigidMotion:
    """Group product (x, R)(x', R') = (x + R x', R R')."""
    x = np.asarray(g.x, dtype=float) + np.einsum("...ij,...j->...i", g.R, h.x)
    return RigidMotion(x, np.asarray(g.R) @ np.asarray(h.R))


def inverse(g: RigidMotion) -> RigidMotion:
    Rt = np.swapaxes(np.asarray(g.R, dtype=float), -1, -2)
    return RigidMotion(-np.einsum("...ij,...j->...i", Rt, g.x), Rt)


def skew(v: np.ndarray) -> np.ndarray:
    """Hat operator: 3-vector -> skew-symmetric matrix, so skew(a) @ b = a x b."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(S: np.ndarray) -> np.ndarray:
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def _planar(angle, i: int, j: int) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    k = 3 - i - j
    out[..., k, k] = 1.0
    out[..., i, i] = c
    out[..., j, j] = c
    out[..., i, j] = -s
    out[..., j, i] = s
    return out


def rot_x(angle) -> np.ndarray:
    """Counter-clockwise rotation about e_x."""
    return _planar(angle, 1, 2)


def rot_y(angle) -> np.ndarray:
    """Counter-clockwise rotation about e_y."""
    return _planar(angle, 2, 0)


def rot_z(angle) -> np.ndarray:
    """Counter-clockwise rotation about e_z."""
    return _planar(angle, 0, 1)


def euler_zyz(gamma, beta, alpha) -> np.ndarray:
    """R = R_z(gamma) R_y(beta) R_z(alpha)."""
    return rot_z(gamma) @ rot_y(beta) @ rot_z(alpha)


def orientation_to_beta_gamma(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Spherical angles of unit vectors n, such that
    ``euler_zyz(gamma, beta, 0) @ e_z == n``.

    beta in [0, pi] is the polar angle, gamma in (-pi, pi] the azimuth.
    On the poles gamma is 0; directions within POLE_TOLERANCE of a pole count
    as the pole, so rounding noise does not pick an arbitrary azimuth.
    """
    n = np.asarray(n, dtype=float)
    rho = np.hypot(n[..., 0], n[..., 1])
    # atan2 keeps full precision near the poles, unlike arccos(n_z)
    beta = np.arctan2(rho, n[..., 2])
    gamma = np.where(rho > POLE_TOLERANCE, np.arctan2(n[..., 1], n[..., 0]), 0.0)
    return beta, gamma


def beta_gamma_to_orientation(beta, gamma) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sb = np.sin(beta)
    return np.stack([sb * np.cos(gamma), sb * np.sin(gamma), np.cos(beta)], axis=-1)


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula for the rotation vector w."""
    w = np.asarray(w, dtype=float)
    q = np.linalg.norm(w, axis=-1)
    small = q < 1e-4
    qs = np.where(small, 1.0, q)
    a = np.where(small, 1.0 - q**2 / 6.0 + q**4 / 120.0, np.sin(qs) / qs)
    b = np.where(small, 0.5 - q**2 / 24.0 + q**4 / 720.0,
                 2.0 * np.sin(0.5 * qs) ** 2 / qs**2)
    W = skew(w)
    return np.eye(3) + a[..., None, None] * W + b[..., None, None] * (W @ W)


def _positive_first(axis: np.ndarray) -> np.ndarray:
    """Flip each axis so that its first non-negligible component is positive."""
    big = np.abs(axis) > 1e-9
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(axis, first[..., None], axis=-1)[..., 0]
    return np.where((lead < 0.0)[..., None], -axis, axis)


def so3_log(R: np.ndarray) -> np.ndarray:
    """
    Principal rotation vector (c4, c5, c6) of R, with norm in [0, pi].

    Near angle pi the axis comes from the symmetric part of R. At exactly pi
    the sign is fixed so that the first nonzero axis component is positive.
    """
    R = np.asarray(R, dtype=float)
    cos = np.clip(0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0), -1.0, 1.0)
    w2 = vee(R - np.swapaxes(R, -1, -2))  # 2 sin(q) * axis
    sin = 0.5 * np.linalg.norm(w2, axis=-1)
    q = np.arctan2(sin, cos)

    small = q < 1e-4
    safe_sin = np.where(small | (sin == 0.0), 1.0, sin)
    scale = np.where(small, 0.5 * (1.0 + q**2 / 6.0), 0.5 * q / safe_sin)
    w = scale[..., None] * w2

    near_pi = q > NEAR_PI_THRESHOLD
    if np.any(near_pi):
        Rp = R[near_pi]
        cp = cos[near_pi]
        B = 0.5 * (Rp + np.swapaxes(Rp, -1, -2)) - cp[:, None, None] * np.eye(3)
        B /= (1.0 - cp)[:, None, None]  # = axis axis^T
        k = np.argmax(np.diagonal(B, axis1=-2, axis2=-1), axis=-1)
        col = np.take_along_axis(B, k[:, None, None], axis=-1)[..., 0]
        diag = np.take_along_axis(np.diagonal(B, axis1=-2, axis2=-1), k[:, None], axis=-1)
        axis = col / np.sqrt(diag)
        axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
        dot = np.einsum("...i,...i->...", axis, w2[near_pi])
        degenerate = np.abs(dot) < 1e-15
        axis = np.where((dot < 0.0)[:, None], -axis, axis)
        axis = np.where(degenerate[:, None], _positive_first(axis), axis)
        w[near_pi] = q[near_pi][:, None] * axis
    return w


def _log_series(q: np.ndarray) -> np.ndarray:
    """(1 - (q/2) cot(q/2)) / q**2, with its Taylor series near 0."""
    small = q < SERIES_THRESHOLD
    qs = np.where(small, 1.0, q)
    exact = (1.0 - 0.5 * qs / np.tan(0.5 * qs)) / qs**2
    return np.where(small, 1.0 / 12.0 + q**2 / 720.0, exact)


def se3_log(g: RigidMotion) -> np.ndarray:
    """
    Lie coefficients c = (c1..c6) with g = exp(sum c^i A_i).

    The rotational part is the principal rotation vector of R. The spatial part
    is (I - Omega/2 + q^-2 (1 - (q/2) cot(q/2)) Omega^2) x, with Omega the skew
    matrix of the rotational part and q its norm.
    """
    x = np.asarray(g.x, dtype=float)
    w = so3_log(g.R)
    x, w = np.broadcast_arrays(x, w)
    q = np.linalg.norm(w, axis=-1)
    wx = np.cross(w, x)
    wwx = np.cross(w, wx)
    c1 = x - 0.5 * wx + _log_series(q)[..., None] * wwx
    return np.concatenate([c1, w], axis=-1)


def se3_exp(c: np.ndarray) -> RigidMotion:
    """Closed-form exponential of sum c^i A_i."""
    c = np.asarray(c, dtype=float)
    v, w = c[..., :3], c[..., 3:]
    q = np.linalg.norm(w, axis=-1)
    small = q < 1e-2
    qs = np.where(small, 1.0, q)
    a = np.where(small, 0.5 - q**2 / 24.0 + q**4 / 720.0,
                 2.0 * np.sin(0.5 * qs) ** 2 / qs**2)
    b = np.where(small, 1.0 / 6.0 - q**2 / 120.0 + q**4 / 5040.0,
                 (qs - np.sin(qs)) / qs**3)
    wv = np.cross(w, v)
    x = v + a[..., None] * wv + b[..., None] * np.cross(w, wv)
    return RigidMotion(x, so3_exp(w))


def random_rotations(rng: np.random.Generator, size: int) -> np.ndarray:
    """Haar-uniform rotations via normalised quaternions."""
    qt = rng.normal(size=(size, 4))
    qt /= np.linalg.norm(qt, axis=1, keepdims=True)
    w, x, y, z = qt.T
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
    ], axis=-2)
