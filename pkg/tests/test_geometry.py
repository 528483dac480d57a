import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from conftest import random_rotation
from sphereflow.errors import GraphError, ShapeMismatch
from sphereflow.geometry import (
    RadialGraph,
    SimilarityAction,
    apply_similarity,
    first_order_similarity,
    mean_curvature,
    rescaled_speed,
    rotate_graph,
    solve_rays,
    transplant,
)
from sphereflow.harmonics import SpectralField, num_coeffs, q_norm

AXES = np.array([2.0, 2.15, 1.9])


def ellipsoid(L=40):
    return RadialGraph.from_radius_function(lambda w: 1.0 / np.sqrt(((w / AXES) ** 2).sum(axis=1)), L)


def ellipsoid_mean_curvature(x):
    # H = div(grad F / |grad F|) for F = sum x_i^2 / a_i^2
    g = 2 * x / AXES**2
    hess = 2 / AXES**2
    gn = np.linalg.norm(g, axis=1)
    return (gn**2 * hess.sum() - (g * g * hess).sum(axis=1)) / gn**3


def test_sphere_curvature_and_shrinker_speed():
    for r in (1.0, 2.0, 3.5):
        G = RadialGraph.sphere(r, band_limit=8)
        assert np.allclose(mean_curvature(G).values(), 2 / r, atol=1e-13)
    assert np.allclose(rescaled_speed(RadialGraph.sphere(band_limit=8)).coeffs, 0.0, atol=1e-14)


def test_ellipsoid_curvature_oracle():
    G = ellipsoid()
    H = mean_curvature(G).values()
    assert np.allclose(H, ellipsoid_mean_curvature(G.points()), rtol=1e-9)


def _fibonacci(N):
    i = np.arange(N) + 0.5
    z = 1 - 2 * i / N
    phi = math.pi * (1 + 5**0.5) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def test_cotangent_mesh_oracle():
    # discrete Laplace-Beltrami of the embedding gives the mean-curvature vector
    rng = np.random.default_rng(3)
    c = np.zeros(num_coeffs(8))
    c[4:] = rng.standard_normal(num_coeffs(8) - 4) * 0.004
    G = RadialGraph.from_graph_function(SpectralField(c))
    dirs = _fibonacci(6000)
    tri = ConvexHull(dirs).simplices
    X = dirs * G.grid.evaluate(G.profile.coeffs, dirs)[:, None]
    N = len(X)
    Hvec = np.zeros((N, 3))
    area = np.zeros(N)
    for a, b, cc in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        i, j, k = tri[:, a], tri[:, b], tri[:, cc]
        u, v = X[i] - X[k], X[j] - X[k]
        cot = (u * v).sum(1) / np.linalg.norm(np.cross(u, v), axis=1)
        d = X[i] - X[j]
        np.add.at(Hvec, i, cot[:, None] * d)
        np.add.at(Hvec, j, -cot[:, None] * d)
    tri_area = 0.5 * np.linalg.norm(np.cross(X[tri[:, 1]] - X[tri[:, 0]], X[tri[:, 2]] - X[tri[:, 0]]), axis=1)
    for a in range(3):
        np.add.at(area, tri[:, a], tri_area / 3)
    H_mesh = np.linalg.norm(Hvec, axis=1) / (2 * area)
    H_spec = G.grid.evaluate(mean_curvature(G).coeffs, dirs)
    assert np.median(np.abs(H_mesh - H_spec)) < 2e-3


def test_volume_and_centroid_of_translated_sphere():
    c = np.array([0.2, -0.1, 0.3])
    G = RadialGraph.sphere(1.5, band_limit=24, center=c).recentered((0, 0, 0))
    assert math.isclose(G.volume(), 4 / 3 * math.pi * 1.5**3, rel_tol=1e-12)
    assert math.isclose(G.volume_radius(), 1.5, rel_tol=1e-12)
    assert np.allclose(G.centroid(), c, atol=1e-12)


def test_solve_rays_sphere_intersection():
    G = RadialGraph.sphere(2.0, band_limit=6)
    o = np.array([0.3, 0.2, -0.1])
    rng = np.random.default_rng(0)
    d = rng.standard_normal((20, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    s = solve_rays(G, o, d)
    b = d @ o
    exact = -b + np.sqrt(b * b - (o @ o - 4.0))
    assert np.allclose(s, exact, atol=1e-12)


def test_invalid_graphs_rejected():
    with pytest.raises(GraphError):
        RadialGraph.from_graph_function(SpectralField.constant(-3.0, 4))
    with pytest.raises(GraphError, match="slope"):
        RadialGraph.from_graph_function(SpectralField.harmonic(20, 10, 24, 4.0))


@given(st.floats(0.5, 2.0), st.floats(0, 0.5), st.floats(0.5, 2.0), st.floats(0, 0.5),
       st.integers(0, 2**31))
def test_similarity_group_laws(a1, b1, a2, b2, seed):
    rng = np.random.default_rng(seed)
    U1, U2 = (v / np.linalg.norm(v) for v in rng.standard_normal((2, 3)))
    S1, S2 = SimilarityAction(a1, b1, U1), SimilarityAction(a2, b2, U2)
    x = rng.standard_normal((5, 3))
    assert np.allclose(S2.compose(S1).apply_points(x), S2.apply_points(S1.apply_points(x)))
    assert np.allclose(S1.inverse().apply_points(S1.apply_points(x)), x)


def test_apply_similarity_on_sphere():
    G = RadialGraph.sphere(band_limit=12)
    S = SimilarityAction(1.1, 0.2, (0.0, 0.6, 0.8))
    H = apply_similarity(G, S)
    # image is the sphere of radius 2.2 about 0.2 U
    assert np.allclose(H.centroid(), 0.2 * np.array([0, 0.6, 0.8]), atol=1e-12)
    assert math.isclose(H.volume_radius(), 2.2, rel_tol=1e-12)


def test_first_order_similarity_is_first_order():
    u = SpectralField.harmonic(2, 1, 16, 0.05) + SpectralField.harmonic(3, 0, 16, 0.03)
    G = RadialGraph.from_graph_function(u)
    errs = []
    for e in (4e-3, 2e-3, 1e-3):
        S = SimilarityAction(1 + e, e, (0.0, 0.0, 1.0))
        errs.append(q_norm(apply_similarity(G, S).graph_function() - first_order_similarity(u, S)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_transplant_identities():
    f = SpectralField.harmonic(2, 0, 8, 0.1)
    z = SpectralField.zeros(8)
    assert transplant(f, z) is f
    # constant normal offset of the round sphere is a radius change
    c = SpectralField.constant(0.05, 8)
    assert np.allclose(transplant(SpectralField.constant(0.1, 8), c).coeffs, SpectralField.constant(0.15, 8).coeffs)
    with pytest.raises(ShapeMismatch):
        transplant(f, SpectralField.zeros(6))


@given(st.integers(0, 2**31))
def test_curvature_is_rotation_equivariant(seed):
    # degree <= 6 data on a finer grid keeps the nonlinear curvature un-aliased
    rng = np.random.default_rng(seed)
    L, k = 24, 6
    c = np.zeros(num_coeffs(L))
    c[1 : num_coeffs(k)] = rng.standard_normal(num_coeffs(k) - 1) * 0.01
    G = RadialGraph.from_graph_function(SpectralField(c))
    R = random_rotation(rng)
    H1 = mean_curvature(rotate_graph(G, R))
    H2 = rotate_graph(RadialGraph(mean_curvature(G)), R).profile
    m = num_coeffs(12)
    assert np.allclose(H1.coeffs[:m], H2.coeffs[:m], atol=1e-10)
