import itertools

import numpy as np
import pytest

from oracles import naive_convolve
from se3kernel.convolution import (FodField, KernelTable, _balance, build_kernel_table,
                                   default_radius, delta_field, enhance, raw_kernel_table, shift_twist_convolve)
from se3kernel.kernel import DiffusionParams, Section, integer_offsets, kernel_two_point
from se3kernel.lie import rot_z
from se3kernel.sphere import GridSpec, icosphere, sphere_from_points

P = DiffusionParams(1.0, 0.02, 2.0)


@pytest.fixture(scope="module")
def sphere0():
    return icosphere(0)


@pytest.fixture(scope="module")
def table1(sphere1):
    return build_kernel_table(P, Section.NEW, 2, sphere1)


def test_table_entries_are_kernel_values(sphere0):
    t = build_kernel_table(P, Section.NEW, 1, sphere0, spacing=0.5, normalize="none")
    o, i, j = 5, 3, 7
    y = integer_offsets(1)[o] * 0.5
    ref = kernel_two_point(y, sphere0.points[i], 0.0, sphere0.points[j], P) * 0.125
    assert t.values[o, i, j] == pytest.approx(ref, rel=1e-15)
    np.testing.assert_array_equal(t.column_mass, t.column_sums())


@pytest.mark.parametrize("normalize", ["balanced", "column"])
def test_columns_sum_to_one(sphere1, normalize):
    t = build_kernel_table(P, Section.NEW, 2, sphere1, normalize=normalize)
    assert np.abs(t.column_sums() - 1).max() < 1e-12
    assert np.all(t.values >= 0)
    assert t.mass > 0


def test_balanced_rows_sum_to_one(table1):
    assert np.abs(table1.row_sums() - 1).max() < 1e-12


def test_zero_section_table(sphere1):
    t = build_kernel_table(P, Section.ZERO, 2, sphere1)
    assert np.abs(t.column_sums() - 1).max() < 1e-12


def test_table_symmetry_new(table1):
    # K(o, i, j) = K(-o, j, i): the kernel is symmetric in its two arguments
    V = table1.values
    np.testing.assert_allclose(V, V[::-1].transpose(0, 2, 1), rtol=1e-10, atol=0)


def test_small_time_concentrates(sphere1):
    t = build_kernel_table(DiffusionParams(1.0, 0.02, 1e-3), Section.NEW, 1, sphere1)
    center = len(t.values) // 2
    diag = np.diagonal(t.values[center]) * sphere1.weights
    assert np.all(diag > 0.99)


def test_invalid_arguments(sphere1):
    with pytest.raises(ValueError):
        build_kernel_table(P, Section.NEW, 0, sphere1)
    with pytest.raises(ValueError):
        build_kernel_table(P, Section.NEW, 1, sphere1, normalize="max")


def test_zero_mass_column_is_rejected():
    A = np.array([[1.0, 0.0], [0.5, 0.0]])
    with pytest.raises(ValueError):
        _balance(A, np.ones(2))


def test_balance_symmetric_and_general(rng):
    w = rng.uniform(0.5, 1.5, 6)
    for A in (rng.random((6, 6)) + np.eye(6), None):
        if A is None:
            A = rng.random((6, 6))
            A = A + A.T
        r, c = _balance(A, w)
        B = r[:, None] * A * c[None, :]
        np.testing.assert_allclose(B @ w, 1.0, atol=1e-13)
        np.testing.assert_allclose(w @ B, 1.0, atol=1e-13)


def test_default_radius(sphere1):
    assert default_radius(P, Section.NEW, sphere1) == 5
    assert default_radius(DiffusionParams(1.0, 0.02, 1e-3), Section.NEW, sphere1) == 1


def test_identity_kernel_is_bitwise(sphere1, rng):
    u = FodField(GridSpec((4, 3, 5)), sphere1, rng.random((4, 3, 5, 42)))
    for boundary in ("zero", "periodic"):
        w = shift_twist_convolve(KernelTable.identity(sphere1), u, boundary)
        np.testing.assert_array_equal(w.values, u.values)


@pytest.mark.parametrize("periodic", [False, True])
def test_matches_naive_reference(sphere0, rng, periodic):
    table = build_kernel_table(P, Section.NEW, 1, sphere0)
    dims = (4, 4, 5) if periodic else (3, 4, 3)
    u = FodField(GridSpec(dims), sphere0, rng.random(dims + (12,)))
    fast = shift_twist_convolve(table, u, "periodic" if periodic else "zero").values
    np.testing.assert_allclose(fast, naive_convolve(table, u, periodic), atol=1e-12, rtol=0)


def test_constant_field_periodic(table1, sphere1):
    u = FodField(GridSpec((5, 5, 5)), sphere1, np.full((5, 5, 5, 42), 2.5))
    w = shift_twist_convolve(table1, u, "periodic")
    np.testing.assert_allclose(w.values, 2.5, atol=1e-10)


def test_mass_conserved_periodic(table1, sphere1, rng):
    u = FodField(GridSpec((6, 5, 7)), sphere1, rng.random((6, 5, 7, 42)))
    w = shift_twist_convolve(table1, u, "periodic")
    assert w.mass() == pytest.approx(u.mass(), rel=1e-12)


def test_delta_gives_kernel_column(table1, sphere1):
    j = 17
    u = delta_field(GridSpec((5, 5, 5)), sphere1, index=j)
    assert u.mass() == pytest.approx(1.0, rel=1e-14)
    w = shift_twist_convolve(table1, u)
    np.testing.assert_allclose(w.values, table1.column(j), atol=1e-12, rtol=0)


def test_enhance_matches_convolution(table1, sphere1):
    u = delta_field(GridSpec((5, 5, 5)), sphere1, index=0)
    np.testing.assert_array_equal(enhance(u, P, radius=2).values,
                                  shift_twist_convolve(table1, u).values)


def test_linearity(table1, sphere1, rng):
    grid = GridSpec((4, 4, 4))
    u1 = FodField(grid, sphere1, rng.random((4, 4, 4, 42)))
    u2 = FodField(grid, sphere1, rng.random((4, 4, 4, 42)))
    mix = u1.with_values(2.0 * u1.values + 0.5 * u2.values)
    lhs = shift_twist_convolve(table1, mix).values
    rhs = 2.0 * shift_twist_convolve(table1, u1).values + 0.5 * shift_twist_convolve(table1, u2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_translation_equivariance_bitwise(table1, sphere1, rng):
    u = FodField(GridSpec((5, 6, 5)), sphere1, rng.random((5, 6, 5, 42)))
    shifted = u.with_values(np.roll(u.values, 1, axis=1))
    a = np.roll(shift_twist_convolve(table1, u, "periodic").values, 1, axis=1)
    b = shift_twist_convolve(table1, shifted, "periodic").values
    np.testing.assert_array_equal(a, b)


def test_commutes_with_quarter_turn(rng):
    # directions of the 3x3x3 cube are mapped onto themselves by R_z(pi/2)
    dirs = np.array([d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)], dtype=float)
    sphere = sphere_from_points(dirs)
    R = rot_z(np.pi / 2)
    perm = np.array([sphere.nearest(R @ n) for n in sphere.points])
    np.testing.assert_allclose(sphere.points[perm], sphere.points @ R.T, atol=1e-15)
    table = build_kernel_table(P, Section.NEW, 1, sphere)
    u = FodField(GridSpec((5, 5, 5)), sphere, rng.random((5, 5, 5, len(sphere))))

    def rotate(values):
        # (R u)(R y, R n) = u(y, n); with center c, R(x, y) = (-y, x)
        out = np.empty_like(values)
        for x, y in itertools.product(range(5), repeat=2):
            out[4 - y, x][:, perm] = values[x, y]
        return out

    a = rotate(shift_twist_convolve(table, u).values)
    b = shift_twist_convolve(table, u.with_values(rotate(u.values))).values
    np.testing.assert_allclose(a, b, atol=1e-10 * np.abs(a).max())


def test_elongation_enhancement(sphere1):
    # two deltas along z with orientation e_z: the point between them on the
    # axis gets more than a point at the same distance off the axis
    j = sphere1.nearest([0, 0, 1])
    grid = GridSpec((9, 9, 9))
    u = delta_field(grid, sphere1, voxel=(4, 4, 2), index=j)
    u = u.with_values(u.values + delta_field(grid, sphere1, voxel=(4, 4, 6), index=j).values)
    w = enhance(u, P, radius=4).values
    assert w[4, 4, 4, j] > w[4, 6, 2, j]
    assert w[4, 4, 4, j] > w[6, 4, 4, j]


def test_rejects_mismatch(table1, sphere0):
    u = FodField(GridSpec((3, 3, 3)), sphere0, np.zeros((3, 3, 3, 12)))
    with pytest.raises(ValueError):
        shift_twist_convolve(table1, u)
    u1 = FodField(GridSpec((3, 3, 3), 2.0), table1.sphere, np.zeros((3, 3, 3, 42)))
    with pytest.raises(ValueError):
        shift_twist_convolve(table1, u1)
    with pytest.raises(ValueError):
        shift_twist_convolve(table1, u1.with_values(u1.values), boundary="reflect")


def test_field_shape_is_checked(sphere1):
    with pytest.raises(ValueError):
        FodField(GridSpec((2, 2, 2)), sphere1, np.zeros((2, 2, 2, 12)))


def test_raw_table_shape(sphere0):
    assert raw_kernel_table(P, Section.ZERO, 1, sphere0).shape == (27, 12, 12)
