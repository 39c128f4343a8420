import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from se3kernel.lie import (RigidMotion, compose, euler_zyz, identity, inverse,
                           orientation_to_beta_gamma, random_rotations, rot_x, rot_y, rot_z,
                           se3_exp, se3_log, skew, so3_exp, so3_log, vee)

E_Z = np.array([0.0, 0.0, 1.0])


def homogeneous(c):
    """4x4 Lie algebra matrix of coefficients c (spatial first)."""
    A = np.zeros((4, 4))
    A[:3, :3] = skew(c[3:])
    A[:3, 3] = c[:3]
    return A


def random_coefficients(rng, size, max_angle=np.pi - 1e-3):
    axis = rng.normal(size=(size, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    angle = rng.uniform(0, max_angle, size)
    return np.column_stack([rng.normal(scale=3.0, size=(size, 3)), axis * angle[:, None]])


def test_compose_and_inverse(rng):
    R = random_rotations(rng, 2)
    g = RigidMotion(rng.normal(size=3), R[0])
    h = RigidMotion(rng.normal(size=3), R[1])
    gh = compose(g, h)
    np.testing.assert_allclose(gh.x, g.x + R[0] @ h.x)
    e = compose(g, inverse(g))
    np.testing.assert_allclose(e.x, 0.0, atol=1e-14)
    np.testing.assert_allclose(e.R, np.eye(3), atol=1e-14)
    np.testing.assert_array_equal(identity().R, np.eye(3))


def test_skew_vee(rng):
    a, b = rng.normal(size=(2, 3))
    np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)
    np.testing.assert_array_equal(vee(skew(a)), a)


@pytest.mark.parametrize("rot, axis", [(rot_x, 0), (rot_y, 1), (rot_z, 2)])
def test_elementary_rotations_match_scipy(rot, axis):
    v = np.zeros(3)
    v[axis] = 0.7
    np.testing.assert_allclose(rot(0.7), Rotation.from_rotvec(v).as_matrix(), atol=1e-15)


def test_euler_zyz_matches_scipy():
    R = euler_zyz(0.3, 1.1, -0.4)
    ref = Rotation.from_euler("ZYZ", [0.3, 1.1, -0.4]).as_matrix()
    np.testing.assert_allclose(R, ref, atol=1e-15)


def test_beta_gamma_reconstruct_orientation(rng):
    n = rng.normal(size=(100, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    beta, gamma = orientation_to_beta_gamma(n)
    got = euler_zyz(gamma, beta, np.zeros(100)) @ E_Z
    np.testing.assert_allclose(got, n, atol=1e-15)


def test_poles_have_zero_azimuth():
    beta, gamma = orientation_to_beta_gamma(np.array([[0, 0, 1.0], [0, 0, -1.0], [1e-15, 0, 1]]))
    np.testing.assert_array_equal(gamma, 0.0)
    np.testing.assert_allclose(beta, [0, np.pi, 1e-15])


def test_so3_against_scipy(rng):
    w = random_coefficients(rng, 200)[:, 3:]
    np.testing.assert_allclose(so3_exp(w), Rotation.from_rotvec(w).as_matrix(), atol=1e-14)
    np.testing.assert_allclose(so3_log(so3_exp(w)), w, atol=1e-12)


def test_so3_log_small_angles():
    for q in (0.0, 1e-12, 1e-8, 1e-5, 1e-3):
        w = np.array([q, -2 * q, 0.5 * q]) / 2.3
        np.testing.assert_allclose(so3_log(so3_exp(w)), w, atol=1e-16, rtol=1e-10)


def test_so3_log_near_pi():
    axis = np.array([1.0, 2.0, -2.0]) / 3.0
    for eps in (1e-3, 1e-6, 1e-9):
        w = (np.pi - eps) * axis
        np.testing.assert_allclose(so3_log(so3_exp(w)), w, atol=1e-9)


def test_so3_log_exactly_pi_is_canonical():
    for axis in (np.array([0.0, -1.0, 0.0]), np.array([-1.0, 1.0, 0.0]) / np.sqrt(2)):
        R = 2 * np.outer(axis, axis) - np.eye(3)
        w = so3_log(R)
        assert np.isclose(np.linalg.norm(w), np.pi)
        first = w[np.flatnonzero(np.abs(w) > 1e-9)[0]]
        assert first > 0
        np.testing.assert_allclose(so3_exp(w), R, atol=1e-14)


def test_se3_exp_matches_matrix_exponential(rng):
    for c in random_coefficients(rng, 50):
        g = se3_exp(c)
        E = expm(homogeneous(c))
        np.testing.assert_allclose(g.R, E[:3, :3], atol=1e-12)
        np.testing.assert_allclose(g.x, E[:3, 3], atol=1e-11)


def test_se3_log_known_values():
    # pure translation and pure rotation
    np.testing.assert_allclose(se3_log(RigidMotion(np.array([1.0, 2, 3]), np.eye(3))),
                               [1, 2, 3, 0, 0, 0])
    c = se3_log(RigidMotion(np.zeros(3), rot_z(0.5)))
    np.testing.assert_allclose(c, [0, 0, 0, 0, 0, 0.5], atol=1e-15)
    # screw motion along z: translation along the axis is unchanged
    c = se3_log(RigidMotion(np.array([0, 0, 2.0]), rot_z(1.0)))
    np.testing.assert_allclose(c, [0, 0, 2, 0, 0, 1], atol=1e-15)


def test_se3_log_series_branch_is_continuous():
    x = np.array([0.3, -1.0, 2.0])
    axis = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    qs = np.array([1e-4 * (1 - 1e-9), 1e-4 * (1 + 1e-9)])
    c = se3_log(RigidMotion(np.broadcast_to(x, (2, 3)), so3_exp(qs[:, None] * axis)))
    np.testing.assert_allclose(c[0], c[1], atol=1e-12)


def test_round_trip_batch(rng):
    c = random_coefficients(rng, 10_000)
    back = se3_log(se3_exp(c))
    assert np.max(np.abs(back - c)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.floats(0, np.pi - 1e-3))
def test_round_trip_property(v, axis, angle):
    axis = np.asarray(axis)
    norm = np.linalg.norm(axis)
    w = axis / norm * angle if norm > 1e-3 else np.zeros(3)
    c = np.concatenate([v, w])
    np.testing.assert_allclose(se3_log(se3_exp(c)), c, atol=1e-9)


def test_log_of_inverse_is_negative(rng):
    c = random_coefficients(rng, 100)
    g = se3_exp(c)
    np.testing.assert_allclose(se3_log(inverse(g)), -c, atol=1e-9)
