import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereflow.errors import FlowError, TrajectoryGap
from sphereflow.flow import (
    FlowControls,
    evolve_mcf,
    evolve_rmcf,
    linear_propagator,
    phi_functions,
    propagator_matrix,
    rhs_jacobian,
    step_rmcf,
    weighted_gram,
)
from sphereflow.geometry import RadialGraph
from sphereflow.harmonics import SpectralField, degree_vector, eigenvalue, num_coeffs, q_norm, symmetry_projector


def test_phi_functions_series_branch_is_continuous():
    z = np.array([-1e-3 * (1 + 1e-9), -1e-3 * (1 - 1e-9), 1e-7, 0.0, -2.0])
    p1, p2 = phi_functions(z)
    exact1 = np.expm1(z[-1]) / z[-1]
    assert math.isclose(p1[-1], exact1, rel_tol=1e-14)
    assert abs(p1[0] - p1[1]) < 1e-12 and abs(p2[0] - p2[1]) < 1e-12
    assert p1[3] == 1.0 and p2[3] == 0.5


def test_shrinker_is_stationary():
    traj = evolve_rmcf(RadialGraph.sphere(band_limit=8), 1.0, FlowControls(snapshot_every=0.5))
    assert np.abs(traj.graph_functions()).max() < 1e-14


@pytest.mark.parametrize("k,m", [(0, 0), (1, -1), (2, 2), (3, 1), (4, -3)])
def test_small_modes_follow_the_linear_spectrum(k, m):
    u = SpectralField.harmonic(k, m, 8, 1e-7)
    traj = evolve_rmcf(RadialGraph.from_graph_function(u), 0.5, FlowControls(snapshot_every=0.5))
    ratio = traj.graph_function(-1).coeffs @ u.coeffs / (u.coeffs @ u.coeffs)
    assert math.isclose(ratio, math.exp(0.5 * eigenvalue(k)), rel_tol=1e-5)


def test_step_rmcf_validates_dt():
    with pytest.raises(ValueError):
        step_rmcf(RadialGraph.sphere(band_limit=4), dt=0.1)
    with pytest.raises(ValueError):
        FlowControls(dt=0.0)


def test_graph_loss_raises_with_partial_trajectory():
    # a big X+ mode blows up exponentially; the flow stops at the min-radius guard
    G = RadialGraph.from_graph_function(SpectralField.constant(-1.0, 6))
    with pytest.raises(FlowError) as info:
        evolve_rmcf(G, 5.0, FlowControls(snapshot_every=0.1))
    traj = info.value.trajectory
    assert 0 < traj.times[-1] < 5.0
    soft = evolve_rmcf(G, 5.0, FlowControls(snapshot_every=0.1, raise_on_failure=False))
    assert "stopped" in soft.meta


def test_trajectory_lookup():
    traj = evolve_rmcf(RadialGraph.sphere(band_limit=4), 0.2, FlowControls(snapshot_every=0.1))
    assert np.allclose(traj.times, [0, 0.1, 0.2])
    assert traj.index_of(0.1) == 1
    with pytest.raises(TrajectoryGap):
        traj.index_of(0.15)


def test_symmetry_projection_keeps_class():
    L = 8
    u = SpectralField.harmonic(3, -2, L, 0.05)
    traj = evolve_rmcf(RadialGraph.from_graph_function(u), 0.5, FlowControls(snapshot_every=0.5, symmetry="tetrahedral"))
    P = symmetry_projector("tetrahedral", L)
    end = traj.graph_functions()[-1]
    assert np.allclose(P @ end, end, atol=1e-15)
    assert traj.meta["symmetry"] == "tetrahedral"


def test_mcf_round_sphere_law():
    # r(tau)^2 = r0^2 - 2 n tau; extinction at r0^2 / 4
    res = evolve_mcf(RadialGraph.sphere(1.0, band_limit=4), FlowControls(dt=1e-4, snapshot_every=0.02))
    traj = res.trajectory
    for t, G in traj.snapshots[:5]:
        assert math.isclose(G.volume_radius() ** 2, 1.0 - 4 * t, rel_tol=1e-6)
    lo, hi = res.extinction_window
    assert lo <= 0.25 + 1e-6 and hi >= 0.25 - 1e-6 and hi - lo < 1e-8


def test_linearization_at_the_shrinker_is_the_heat_semigroup():
    L = 6
    traj = evolve_rmcf(RadialGraph.sphere(band_limit=L), 0.5, FlowControls(snapshot_every=0.5))
    P = propagator_matrix(traj)
    expected = np.diag(np.exp(0.5 * eigenvalue(degree_vector(L))))
    assert np.abs(P.matrix - expected).max() < 1e-7
    assert np.allclose(weighted_gram(traj.graph(0)), np.eye(num_coeffs(L)), atol=1e-12)


@settings(max_examples=5)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_propagator_is_linear(seed, a, b):
    L = 5
    rng = np.random.default_rng(seed)
    base = SpectralField(rng.standard_normal(num_coeffs(L)) * 0.01)
    traj = evolve_rmcf(RadialGraph.from_graph_function(base), 0.1, FlowControls(snapshot_every=0.1))
    v, w = (SpectralField(rng.standard_normal(num_coeffs(L))) for _ in range(2))
    lhs = linear_propagator(traj, v * a + w * b)[1][-1]
    rhs = linear_propagator(traj, v)[1][-1] * a + linear_propagator(traj, w)[1][-1] * b
    scale = max(q_norm(lhs), 1.0)
    assert q_norm(lhs - rhs) <= 1e-7 * scale


def test_duhamel_duality_and_restricted_columns():
    L = 5
    rng = np.random.default_rng(2)
    u0 = SpectralField(rng.standard_normal(num_coeffs(L)) * 0.02)
    traj = evolve_rmcf(RadialGraph.from_graph_function(u0), 0.2, FlowControls(snapshot_every=0.1))
    P = propagator_matrix(traj, 0.0, 0.2)
    v, w = (SpectralField(rng.standard_normal(num_coeffs(L))) for _ in range(2))
    assert P.duhamel_check(v, w) < 1e-12
    Pr = propagator_matrix(traj, 0.0, 0.2, max_degree=2)
    assert not Pr.is_square
    assert np.allclose(Pr.matrix, P.matrix[:, Pr.columns], atol=1e-9)
    with pytest.raises(ValueError):
        Pr.adjoint_matrix()


def test_rhs_jacobian_at_shrinker_is_diagonal():
    L = 5
    J = rhs_jacobian(np.zeros(num_coeffs(L)))
    assert np.abs(J - np.diag(eigenvalue(degree_vector(L)))).max() < 1e-7
