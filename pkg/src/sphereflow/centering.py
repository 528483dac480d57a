"""Extinction events and centering maps.

A centering map is the parabolic similarity (dilation then translation of
the initial surface) that moves the extinction point of a perturbed flow
onto that of a base flow. Extinction points are read off trajectories on
either clock:

* plain MCF: fit ``R_V^2 = 2n (T* - tau)`` over the final decade of
  inradius, with ``R_V`` the volume radius, and extrapolate the centroid;
* rescaled flow about ``(x0, T0)``: each snapshot is a surface at
  ``tau = T0 - e^{-t}`` scaled by ``e^{t/2}``; if it were round it would
  vanish at ``T0 + e^{-t}(R_V^2/2n - 1)`` at its centroid. The error is
  quadratic in the non-round part, so late snapshots give sharp estimates
  without any cancellation.

Because the unstable modes grow like e^t and e^{t/2}, the map is refined
iteratively in the rescaled frame (:func:`center_flow`).
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FitError, FlowError
from .flow import FlowControls, evolve_rmcf
from .geometry import RadialGraph, SimilarityAction, apply_similarity
from .harmonics import mode_split

FIT_THRESHOLD = 1e-3


@dataclass(frozen=True)
class ExtinctionEvent:
    """Spacetime point (x*, T*) where a flow disappears."""

    point: tuple
    time: float
    residual: float = 0.0
    clock: str = "exact"
    window: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in np.ravel(self.point)))

    def to_json(self):
        return json.dumps({"point": list(self.point), "time": self.time, "residual": self.residual,
                           "clock": self.clock, "window": self.window})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(tuple(d["point"]), d["time"], d["residual"], d["clock"],
                   None if d["window"] is None else tuple(d["window"]))


ROUND_EVENT = ExtinctionEvent((0.0, 0.0, 0.0), 1.0)


@dataclass(frozen=True)
class CenteringTransform:
    """Initial-data similarity x -> alpha x + translation."""

    alpha: float
    translation: tuple
    residuals: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "translation", tuple(float(v) for v in np.ravel(self.translation)))

    @property
    def norm(self):
        return abs(self.alpha - 1.0) + float(np.linalg.norm(self.translation))

    @property
    def action(self):
        return SimilarityAction.from_translation(self.alpha, self.translation)

    @classmethod
    def from_action(cls, S, residuals=None):
        return cls(S.alpha, tuple(S.translation), residuals or {})

    def compose(self, first):
        """Apply ``first`` and then ``self``."""
        S = self.action.compose(first.action)
        return CenteringTransform.from_action(S, dict(self.residuals))

    def to_json(self):
        return json.dumps({"alpha": self.alpha, "translation": list(self.translation),
                           "norm": self.norm, "residuals": self.residuals}, default=float)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["alpha"], tuple(d["translation"]), d.get("residuals", {}))


IDENTITY = CenteringTransform(1.0, (0.0, 0.0, 0.0))


def _mcf_event(traj, decade, threshold):
    radii, vr, cents = [], [], []
    for i in range(len(traj)):
        G = traj.graph(i)
        radii.append(G.inradius())
        vr.append(G.volume_radius())
        cents.append(G.centroid())
    radii, vr, cents = np.array(radii), np.array(vr), np.array(cents)
    tau = traj.times
    n = traj.n
    sel = radii <= decade * radii[-1]
    if sel.sum() < 2:
        sel = np.zeros_like(sel)
        sel[-2:] = True
    est = tau[sel] + vr[sel] ** 2 / (2 * n)
    T = float(est[-1])
    # centroid drift, linear in tau, evaluated at T
    ts = tau[sel]
    if sel.sum() >= 2 and np.ptp(ts) > 0:
        A = np.stack([ts, np.ones_like(ts)], axis=1)
        coef = np.linalg.lstsq(A, cents[sel], rcond=None)[0]
        x = coef[0] * T + coef[1]
    else:
        x = cents[sel][-1]
    residual = float(np.ptp(est) / max(T - tau[sel][0], 1e-300))
    window = traj.meta.get("extinction_window")
    return ExtinctionEvent(x, T, residual, "mcf", None if window is None else tuple(map(float, window)))


def _rmcf_event(traj, fraction):
    (x0, T0) = traj.zoom
    x0 = np.asarray(x0, dtype=float)
    n = traj.n
    t = traj.times
    start = t[-1] - fraction * (t[-1] - t[0])
    idx = [i for i in range(len(t)) if t[i] >= start - 1e-12]
    dts, dxs = [], []
    for i in idx:
        G = traj.graph(i)
        rv = G.volume_radius()
        dts.append(math.exp(-t[i]) * (rv * rv / (2 * n) - 1.0))
        dxs.append(math.exp(-t[i] / 2) * G.centroid())
    dts, dxs = np.array(dts), np.array(dxs)
    residual = float(np.abs(dts - dts[-1]).max() + np.abs(dxs - dxs[-1]).max())
    return ExtinctionEvent(x0 + dxs[-1], T0 + dts[-1], residual, "rmcf")


def extinction_event(traj, decade=10.0, fraction=0.4, threshold=FIT_THRESHOLD):
    """Estimate (x*, T*) from an MCF or rescaled-flow trajectory.

    Raises :class:`FitError` when the round-sphere law does not fit the
    final window (relative spread above ``threshold``), which flags a
    non-spherical collapse.
    """
    if traj.clock == "mcf":
        ev = _mcf_event(traj, decade, threshold)
    else:
        ev = _rmcf_event(traj, fraction)
    if ev.residual > threshold:
        raise FitError(f"extinction fit residual {ev.residual:.3e} exceeds {threshold:.1e}")
    return ev


def centering_map(base, perturbed):
    """Similarity carrying the perturbed extinction event onto ``base``.

    ``perturbed`` is an :class:`ExtinctionEvent` or a trajectory. The
    dilation ``alpha = sqrt(T_base / T_pert)`` acts as (x, tau) ->
    (alpha x, alpha^2 tau); the translation then matches the points.
    """
    ev = perturbed if isinstance(perturbed, ExtinctionEvent) else extinction_event(perturbed)
    if not (ev.time > 0 and base.time > 0):
        raise FitError("extinction times must be positive")
    alpha = math.sqrt(base.time / ev.time)
    shift = np.asarray(base.point) - alpha * np.asarray(ev.point)
    return CenteringTransform(alpha, tuple(shift), {"fit_residual": ev.residual})


@dataclass
class CenteredFlow:
    """Result of :func:`center_flow`."""

    transform: CenteringTransform
    initial: RadialGraph
    trajectory: object
    history: list


def center_flow(G0, horizon=12.0, controls=None, max_iter=6, tol=1e-11, max_deviation=0.2):
    """Iteratively center ``G0`` so its singularity sits at (0, 1).

    Each pass evolves the rescaled flow of the current centered data until
    ``horizon`` (or until the unstable modes reach ``max_deviation``),
    reads off the residual extinction event and composes the correction.
    The last pass whose correction is below ``tol`` is returned as the
    centered trajectory.
    """
    controls = controls or FlowControls()
    ctrl = replace(controls, raise_on_failure=False, max_deviation=max_deviation)
    T = IDENTITY
    history = []
    traj = None
    G = G0
    for _ in range(max_iter):
        G = apply_similarity(G0, T.action)
        traj = evolve_rmcf(G, horizon, ctrl)
        if len(traj) == 0:
            raise FlowError("centered data left the graph regime immediately", traj)
        C = centering_map(ROUND_EVENT, extinction_event(traj, threshold=np.inf))
        history.append((C.norm, float(traj.times[-1])))
        T = C.compose(T)
        if C.norm < tol and "stopped" not in traj.meta:
            break
    else:
        if "stopped" in traj.meta:
            raise FlowError("centering did not converge within the graph regime", traj)
    T = CenteringTransform(T.alpha, T.translation, {"iterations": len(history), "last_correction": history[-1][0]})
    return CenteredFlow(T, G, traj, history)


@dataclass
class CompareReport:
    transform: CenteringTransform
    fractions_before: tuple
    fractions_after: tuple
    difference: object
    centered: CenteredFlow


def recenter_and_compare(base_traj, perturbed_initial, T, controls=None, horizon=None, **kw):
    """Center a perturbed flow and split ``w(T) - f(T)`` into X+ / X2 / X-.

    ``base_traj`` is the (centered) rescaled base flow ``f``; the perturbed
    flow is centered with :func:`center_flow` and sampled at time ``T``.
    """
    horizon = max(T, 12.0) if horizon is None else horizon
    controls = controls or FlowControls(dt=base_traj.dt)
    cf = center_flow(perturbed_initial, horizon, controls, **kw)
    traj = cf.trajectory
    w = traj.graph_function(traj.index_of(T))
    f = base_traj.graph_function(base_traj.index_of(T))
    before = perturbed_initial.graph_function() - base_traj.graph_function(0)
    diff = w - f
    return CompareReport(cf.transform, mode_split(before).fractions, mode_split(diff).fractions, diff, cf)
