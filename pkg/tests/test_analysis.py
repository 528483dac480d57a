import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphereflow.analysis import (
    ConeQuery,
    SingularityReport,
    classify_singularity,
    cone_membership,
    cone_parameter,
    decay_rate,
    design_perturbation,
    two_share,
)
from sphereflow.errors import FitError
from sphereflow.harmonics import SpectralField, degree_vector, eigenvalue, flat_index, num_coeffs, q_weights

L = 6
coeffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=num_coeffs(L), max_size=num_coeffs(L))


def synthetic(modes, times=np.linspace(0, 12, 241)):
    """Linear-flow history: sum of amp * e^{lambda_k t} Y_km."""
    C = np.zeros((len(times), num_coeffs(L)))
    for k, m, a in modes:
        C[:, flat_index(k, m)] += a * np.exp(eigenvalue(k) * times)
    return times, C


@given(coeffs, st.floats(1e-6, 1e6))
def test_cone_parameter_is_scale_invariant(c, s):
    u = SpectralField(np.array(c))
    a, b = cone_parameter(u), cone_parameter(u * s)
    assert (np.isinf(a) and np.isinf(b)) or math.isclose(a, b, rel_tol=1e-12)


@given(coeffs, st.floats(0.1, 10))
def test_cone_membership_matches_parameter(c, kappa):
    u = SpectralField(np.array(c))
    member, margin = cone_membership(u, ConeQuery(kappa, "K+"))
    assert member == (cone_parameter(u) >= kappa * (1 - 1e-12))


def test_cone_query_validation():
    with pytest.raises(ValueError):
        ConeQuery(0.0)
    with pytest.raises(ValueError):
        ConeQuery(1.0, "K-")
    y1, y3 = SpectralField.harmonic(1, 0, L), SpectralField.harmonic(3, 0, L)
    assert cone_membership(y1, ConeQuery(5.0))[0]
    assert not cone_membership(y3, ConeQuery(0.1))[0]
    # K uses X+ + X2 as its axis
    assert cone_membership(SpectralField.harmonic(2, 0, L), ConeQuery(5.0, "K"))[0]


def test_decay_rate_exact_on_synthetic_modes():
    t, C = synthetic([(2, 1, 1e-3), (3, 0, 1e-3)])
    rep = decay_rate((t, C), window=(8, 12))
    assert rep.dominant_degree == 2
    assert abs(rep.decay_rate + 0.5) < 1e-4
    # P_2 recovered at t = 0
    assert rep.pk_coeffs[[m for _, m, _ in rep.pk_coeffs].index(1)][2] == pytest.approx(1e-3, rel=1e-9)
    # the correction decays with gap lambda_2 - lambda_3 = 3/2
    assert rep.gap == pytest.approx(1.5, abs=1e-6)


def test_classification_verdicts():
    slow = classify_singularity(synthetic([(2, 0, 1e-2), (4, 1, 1e-2), (1, 0, 1e-9)]))
    assert slow.verdict == "slow"
    fast = classify_singularity(synthetic([(3, -2, 1e-2), (4, 0, 1e-3)], np.linspace(0, 4, 81)))
    assert fast.verdict == "fast" and fast.dominant_degree == 3
    assert fast.decay_rate == pytest.approx(-2.0, abs=1e-6)
    # comparable degree-2 and degree-3 norms at the end of the window
    t = np.linspace(0, 12, 241)
    tie = classify_singularity(synthetic([(2, 0, 1e-3), (3, 0, 1e-3 * math.exp(1.5 * 12))], t), window=(11, 12))
    assert tie.verdict == "indeterminate"


def test_fast_decay_window_falls_back_to_the_band():
    # fast mode leaves [1e-8, 1e-2] long before the end of the run
    rep = classify_singularity(synthetic([(3, 2, 1e-2)]))
    assert rep.verdict == "fast"
    assert rep.window[1] < 8


def test_fit_errors():
    t = np.linspace(0, 1, 5)
    with pytest.raises(FitError):
        decay_rate((t, np.zeros((5, num_coeffs(L)))))
    with pytest.raises(FitError):
        decay_rate(synthetic([(2, 0, 100.0)]))  # never enters the fit band


def test_report_json_round_trip():
    rep = classify_singularity(synthetic([(2, 0, 1e-2)]))
    back = SingularityReport.from_json(rep.to_json())
    assert back.verdict == rep.verdict and back.pk_coeffs == rep.pk_coeffs
    assert json.loads(rep.to_json())["dominant_degree"] == 2


def test_design_prefers_degree_two():
    # a diagonal "propagator" where degree 3 dominates in size: design must still pick degree 2
    k = degree_vector(L)
    M = np.diag(np.where(k == 2, 0.1, np.where(k == 3, 5.0, 1.0)))
    res = design_perturbation(M, budget=2.0, max_degree=4)
    v = res.perturbation
    assert res.ratio == pytest.approx(1.0)
    assert np.linalg.norm(v.coeffs) == pytest.approx(2.0)
    assert np.all(v.coeffs[k != 2] == 0)
    assert two_share(SpectralField(M @ v.coeffs)) == pytest.approx(1.0)
    with pytest.raises(FitError):
        design_perturbation(M, exclude_degrees=(2,), target_ratio=0.5)


def test_two_share_weights():
    u = SpectralField.harmonic(2, 0, L) + SpectralField.harmonic(0, 0, L)
    w = q_weights(L)
    expected = math.sqrt(w[flat_index(2, 0)] / (w[0] + w[flat_index(2, 0)]))
    assert two_share(u) == pytest.approx(expected)
