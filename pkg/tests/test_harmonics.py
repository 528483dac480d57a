import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import sph_harm_y

from conftest import random_rotation
from sphereflow.errors import ShapeMismatch, UnsupportedDimension
from sphereflow.harmonics import (
    SpectralField,
    SphereGrid,
    degree_vector,
    eigenvalue,
    flat_index,
    h1_norm,
    heat_semigroup,
    mode_split,
    num_coeffs,
    order_vector,
    q_inner,
    q_norm,
    read_coefficients_csv,
    rotate,
    sphere_grid,
    symmetry_projector,
    tetrahedral_rotations,
    write_coefficients_csv,
)

coeff_lists = st.lists(st.floats(-1, 1, allow_nan=False), min_size=num_coeffs(6), max_size=num_coeffs(6))


def test_eigenvalues_closed_form():
    assert eigenvalue(0) == 1.0
    assert eigenvalue(1) == 0.5
    assert eigenvalue(2) == -0.5
    assert eigenvalue(3) == -2.0
    assert math.isclose(eigenvalue(2, n=3), -1.0 / 3.0)  # lambda_2 = -1/n


def test_index_layout():
    L = 5
    k, m = degree_vector(L), order_vector(L)
    assert len(k) == num_coeffs(L) == 36
    for i, (kk, mm) in enumerate(zip(k, m)):
        assert flat_index(kk, mm) == i
        assert abs(mm) <= kk


def test_basis_orthonormal_on_shrinker():
    grid = sphere_grid(8)
    B = grid.synthesize(np.eye(grid.num_coeffs))
    G = B.T @ (grid.area_weights[:, None] * B)
    assert np.allclose(G, np.eye(grid.num_coeffs), atol=1e-13)


def test_basis_matches_scipy_real_harmonics():
    # real orthonormal harmonics on the unit sphere, rescaled to radius 2
    grid = sphere_grid(6)
    d = grid.directions
    theta, phi = np.arccos(d[:, 2]), np.arctan2(d[:, 1], d[:, 0])
    for k, m in [(0, 0), (1, 0), (2, 1), (3, -2), (4, 4), (5, -5)]:
        Y = sph_harm_y(k, abs(m), theta, phi)
        ref = Y.real if m == 0 else math.sqrt(2) * (Y.real if m > 0 else Y.imag)
        ref = ref / 2.0  # no Condon-Shortley phase in our basis
        got = SpectralField.harmonic(k, m, 6).values()
        assert np.allclose(got, ref, atol=1e-12), (k, m)


@given(coeff_lists)
def test_synthesis_analysis_round_trip(c):
    grid = sphere_grid(6)
    c = np.array(c)
    assert np.allclose(grid.analyze(grid.synthesize(c)), c, atol=1e-13)


def test_laplacian_from_nodal_derivatives():
    # Delta Y_k = -k(k+1)/R^2 Y_k, checked through the nodal derivative tables
    grid = sphere_grid(10)
    for k, m in [(1, 1), (2, 0), (3, -2), (7, 5)]:
        c = SpectralField.harmonic(k, m, 10).coeffs
        f, ft, fp, ftt, ftp, fpp = grid.synthesize_derivatives(c)
        lap = (ftt + grid.node_cot * ft + fpp / grid.node_sin**2) / 4.0
        assert np.allclose(lap, -k * (k + 1) / 4.0 * f, atol=1e-11)


@given(coeff_lists)
def test_q_norm_matches_quadrature(c):
    f = SpectralField(np.array(c))
    # Q = |grad f|^2 + 2 f^2 on the shrinker; h1_norm uses weight 1
    q_quad = h1_norm(f) ** 2 + np.sum(f.coeffs**2)
    assert math.isclose(q_norm(f) ** 2, q_quad, rel_tol=1e-10, abs_tol=1e-12)


@given(coeff_lists)
def test_mode_split_is_orthogonal(c):
    f = SpectralField(np.array(c))
    s = mode_split(f)
    assert np.allclose((s.plus + s.two + s.minus).coeffs, f.coeffs)
    assert abs(q_inner(s.plus, s.minus)) < 1e-14
    assert math.isclose(sum(q * q for q in s.q_norms), q_norm(f) ** 2, rel_tol=1e-12, abs_tol=1e-14)


@given(coeff_lists, st.floats(0, 3))
def test_heat_semigroup_is_a_semigroup(c, t):
    f = SpectralField(np.array(c))
    a = heat_semigroup(heat_semigroup(f, t), 0.5)
    b = heat_semigroup(f, t + 0.5)
    assert np.allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-14)


@given(coeff_lists, st.integers(0, 2**31))
def test_rotation_preserves_degree_norms(c, seed):
    f = SpectralField(np.array(c))
    R = random_rotation(np.random.default_rng(seed))
    g = rotate(f, R)
    assert np.allclose(g.degree_norms(), f.degree_norms(), atol=1e-12)


def test_rotation_moves_values():
    rng = np.random.default_rng(0)
    f = SpectralField(rng.standard_normal(num_coeffs(5)))
    R = random_rotation(rng)
    g = rotate(f, R)
    w = np.array([[0.3, -0.4, 0.866]])
    w /= np.linalg.norm(w)
    assert np.allclose(g.at(w @ R.T), f.at(w), atol=1e-12)


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    f = SpectralField(rng.standard_normal(num_coeffs(7)) * 1e-7)
    path = tmp_path / "f.csv"
    write_coefficients_csv(f, path)
    g = read_coefficients_csv(path)
    assert np.array_equal(f.coeffs, g.coeffs)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        SpectralField.harmonic(1, 0, 4) + SpectralField.harmonic(1, 0, 5)


def test_only_two_dimensional_spheres():
    with pytest.raises(UnsupportedDimension):
        SphereGrid(4, n=3)


def test_tetrahedral_group():
    rots = tetrahedral_rotations()
    assert len(rots) == 12
    for R in rots:
        assert np.allclose(R @ R.T, np.eye(3))
        assert math.isclose(np.linalg.det(R), 1.0)
    # closed under composition
    keys = {tuple(np.round(R, 12).ravel()) for R in rots}
    for A in rots:
        for B in rots:
            assert tuple(np.round(A @ B, 12).ravel()) in keys


def test_tetrahedral_projector():
    L = 6
    P = symmetry_projector("tetrahedral", L)
    assert np.allclose(P @ P, P, atol=1e-13)
    k = degree_vector(L)
    dims = [int(round(np.trace(P[np.ix_(k == j, k == j)]))) for j in range(L + 1)]
    assert dims[:5] == [1, 0, 0, 1, 1]
    xyz = SpectralField.harmonic(3, -2, L)
    assert np.allclose(P @ xyz.coeffs, xyz.coeffs, atol=1e-13)
    with pytest.raises(ValueError):
        symmetry_projector("icosahedral", L)
