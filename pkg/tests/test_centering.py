import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphereflow.centering import (
    IDENTITY,
    ROUND_EVENT,
    CenteringTransform,
    ExtinctionEvent,
    center_flow,
    centering_map,
    extinction_event,
)
from sphereflow.errors import FitError
from sphereflow.flow import FlowControls, evolve_mcf
from sphereflow.geometry import RadialGraph

points = st.tuples(*[st.floats(-1, 1)] * 3)


@given(points, st.floats(0.2, 5), points, st.floats(0.2, 5))
def test_centering_map_carries_event_to_base(xb, Tb, xp, Tp):
    base, pert = ExtinctionEvent(xb, Tb), ExtinctionEvent(xp, Tp)
    C = centering_map(base, pert)
    assert C.alpha**2 * Tp == pytest.approx(Tb)
    assert np.allclose(C.action.apply_points(np.array(xp)), xb, atol=1e-12)


@given(st.floats(0.5, 2), points, st.floats(0.5, 2), points)
def test_transform_composition(a1, t1, a2, t2):
    A, B = CenteringTransform(a1, t1), CenteringTransform(a2, t2)
    x = np.array([[0.1, -0.2, 0.3]])
    assert np.allclose(B.compose(A).action.apply_points(x), B.action.apply_points(A.action.apply_points(x)))
    assert IDENTITY.compose(A).action.apply_points(x) == pytest.approx(A.action.apply_points(x))


def test_json_round_trips():
    C = CenteringTransform(1.01, (0.1, 0, -0.2), {"iterations": 3})
    assert CenteringTransform.from_json(C.to_json()) == C
    E = ExtinctionEvent((0.1, 0.2, 0.3), 0.9, 1e-7, "mcf", (0.89, 0.91))
    assert ExtinctionEvent.from_json(E.to_json()) == E
    with pytest.raises(ValueError):
        CenteringTransform(-1.0, (0, 0, 0))


def test_mcf_extinction_of_translated_sphere():
    c = (0.1, -0.05, 0.2)
    G = RadialGraph.sphere(1.0, band_limit=8, center=c).recentered((0, 0, 0))
    traj = evolve_mcf(G, FlowControls(dt=1e-4, snapshot_every=0.01)).trajectory
    ev = extinction_event(traj)
    assert ev.time == pytest.approx(0.25, abs=1e-6)
    assert np.allclose(ev.point, c, atol=1e-8)


def test_nonspherical_collapse_is_flagged():
    # a stored history that does not follow the round-sphere law
    G = RadialGraph.sphere(1.0, band_limit=4)
    traj = evolve_mcf(G, FlowControls(dt=1e-4, snapshot_every=0.02)).trajectory
    from dataclasses import replace

    warped = replace(traj, times=traj.times * 1.3)
    with pytest.raises(FitError):
        extinction_event(warped, threshold=1e-6)


@pytest.mark.parametrize("scale,shift", [(1.05, (0, 0, 0)), (1.0, (0.05, 0.0, -0.03))])
def test_center_flow_recovers_similarity(scale, shift):
    G = RadialGraph.sphere(2.0 * scale, band_limit=6, center=shift).recentered((0, 0, 0))
    cf = center_flow(G, horizon=3.0)
    T = cf.transform
    assert T.alpha == pytest.approx(1 / scale, abs=1e-10)
    assert np.allclose(np.array(T.translation), -np.array(shift) / scale, atol=1e-10)
    assert np.abs(cf.trajectory.graph_functions()).max() < 1e-8
    assert ROUND_EVENT.time == 1.0
