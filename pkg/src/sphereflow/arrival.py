"""Arrival-time reconstruction, expansion fits and regularity probes.

The arrival time t(x) is the time at which the moving front passes x. It is
recovered Lagrangianly from stored snapshots: along the ray from a
reference point through x the front distance is interpolated in time and
the crossing with |x - ref| is solved for.

For rescaled trajectories zoomed at (x0, T0) the natural variables are
rescaled time sigma and ``log rho(sigma) - sigma/2`` (the log of the
physical front distance), which stay smooth up to the singular time; the
arrival time is then ``T0 - exp(-sigma)`` with no cancellation.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import FitError, SweepError
from .geometry import solve_rays
from .harmonics import degree_vector, num_coeffs, order_vector, shrinker_radius, sphere_grid

DEFAULT_LADDER = tuple(0.2 * 2.0**-j for j in range(7))
FLOOR_FACTOR = 10.0


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


DEFAULT_FRAME = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    tuple(_unit([1.0, 1.0, 0.0])),
    tuple(_unit([0.0, 1.0, 1.0])),
)


@dataclass
class ArrivalSamples:
    """Arrival times t(x) with interpolation-error estimates."""

    points: np.ndarray
    times: np.ndarray
    errors: np.ndarray = None
    event: tuple = None  # (point, time) used as reference
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        if self.errors is None:
            self.errors = np.zeros_like(self.times)
        if len(self.points) != len(self.times):
            raise ValueError("points and times differ in length")

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            if self.event is not None:
                p, T = self.event
                fh.write(f"# event_point={list(map(float, p))} event_time={float(T)!r}\n")
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "x3", "t", "err"])
            for x, t, e in zip(self.points, self.times, self.errors):
                w.writerow([repr(float(v)) for v in (*x, t, e)])

    @classmethod
    def from_csv(cls, path):
        event = None
        with open(path) as fh:
            lines = fh.read().splitlines()
        if lines and lines[0].startswith("#"):
            head = lines.pop(0)[1:].strip()
            pt = head.split("event_point=")[1].split(" event_time=")[0]
            event = (tuple(json.loads(pt)), float(head.split("event_time=")[1]))
        rows = list(csv.reader(lines))[1:]
        a = np.array(rows, dtype=float).reshape(-1, 5)
        return cls(a[:, :3], a[:, 3], a[:, 4], event)


# -- crossing solver -------------------------------------------------------------


def _crossings(v, Y, target):
    """Solve Y(v) = target per column; Y strictly decreasing in v.

    ``v`` (m,), ``Y`` (m, N), ``target`` (N,). Uses a not-a-knot cubic spline
    of each column and a safeguarded Newton iteration on the bracketing
    segment. Raises :class:`SweepError` for unswept or re-swept columns.
    """
    if np.any(np.diff(Y, axis=0) >= 0):
        bad = np.nonzero(np.any(np.diff(Y, axis=0) >= 0, axis=0))[0]
        raise SweepError(f"non-monotone sweep at {len(bad)} point(s) (first index {bad[0]})")
    tol = 1e-12 * np.maximum(np.abs(target), 1.0)
    on_start = (Y[0] < target) & (Y[0] >= target - tol)
    target = np.where(on_start, Y[0], target)
    if np.any(Y[0] < target):
        raise SweepError("point lies outside the initial surface (never swept)")
    if np.any(Y[-1] > target):
        n_bad = int(np.sum(Y[-1] > target))
        raise SweepError(f"{n_bad} point(s) not swept within the stored trajectory; extend the horizon "
                         "or use larger probe radii")
    seg = np.clip(np.sum(Y > target[None, :], axis=0) - 1, 0, len(v) - 2)
    cs = CubicSpline(v, Y, axis=0)
    cols = np.arange(Y.shape[1])
    c = cs.c[:, seg, cols]  # (4, N)
    width = v[seg + 1] - v[seg]
    lo, hi = np.zeros_like(width), width.copy()
    y0, y1 = Y[seg, cols], Y[seg + 1, cols]
    x = width * (y0 - target) / (y0 - y1)
    for _ in range(60):
        f = ((c[0] * x + c[1]) * x + c[2]) * x + c[3] - target
        df = (3 * c[0] * x + 2 * c[1]) * x + c[2]
        hi = np.where(f < 0, x, hi)
        lo = np.where(f >= 0, x, lo)
        step = np.where(df < 0, f / np.where(df < 0, df, -1.0), np.inf)
        xn = x - step
        out = ~((xn > lo) & (xn < hi))
        xn = np.where(out, 0.5 * (lo + hi), xn)
        if np.max(np.abs(xn - x)) <= 1e-15 * max(1.0, np.abs(v).max()):
            x = xn
            break
        x = xn
    return v[seg] + x


def _front_data(traj, points, ref):
    """Monotone variable, decreasing front quantity, target and time map."""
    d = points - ref
    s = np.linalg.norm(d, axis=1)
    if np.any(s == 0):
        raise SweepError("the reference point itself is not swept before extinction")
    dirs = d / s[:, None]
    if traj.clock == "rmcf":
        x0, T0 = traj.zoom
        if not np.allclose(ref, x0, atol=0.0):
            raise ValueError("rescaled trajectories are sampled about their zoom center")
        B = sphere_grid(traj.band_limit, traj.n).basis_at(dirs)[0]
        rho = traj.profiles @ B.T  # (nsnap, N)
        sig = np.asarray(traj.times, dtype=float)
        Y = np.log(rho) - 0.5 * sig[:, None]
        return sig, Y, np.log(s), lambda v: T0 - np.exp(-v)
    R = np.array([solve_rays(traj.graph(i), ref, dirs) for i in range(len(traj))])
    return np.asarray(traj.times, dtype=float), R * R, s * s, lambda v: v


def arrival_time(traj, points, reference=None):
    """Arrival times at ``points`` reconstructed from a trajectory.

    ``reference`` is the ray origin (default: the zoom center of a rescaled
    trajectory, or the final ray origin of an MCF trajectory). Error
    estimates compare against a reconstruction from every other snapshot
    (a fourth-order interpolant gains a factor 16 per halving).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if traj.clock == "rmcf":
        ref = np.asarray(traj.zoom[0], dtype=float) if reference is None else np.asarray(reference)
        event = (tuple(map(float, traj.zoom[0])), float(traj.zoom[1]))
    else:
        ref = traj.centers[-1] if reference is None else np.asarray(reference, dtype=float)
        window = traj.meta.get("extinction_window")
        event = (tuple(map(float, ref)), float(np.mean(window))) if window else None
    v, Y, target, to_time = _front_data(traj, points, ref)
    root = _crossings(v, Y, target)
    times = to_time(root)
    errors = np.zeros_like(times)
    if len(v) >= 8:
        keep = np.arange(0, len(v), 2)
        if keep[-1] != len(v) - 1:
            keep = np.append(keep, len(v) - 1)
        try:
            coarse = to_time(_crossings(v[keep], Y[keep], target))
            errors = np.abs(coarse - times) / 15.0
        except SweepError:
            errors = np.full_like(times, np.nan)
    return ArrivalSamples(points, times, errors, event, {"clock": traj.clock})


# -- expansion fit --------------------------------------------------------------


def arrival_coefficient_factor(k, n=2):
    """Ratio between the arrival-time coefficient P_k and the rescaled-flow one.

    A rescaled graph ``sqrt(2n) + e^{lambda_k s} P(w)`` produces the arrival
    term ``|x|^{k + k(k-1)/n} * 2 (2n)^{lambda_k - 3/2} P(w)``.
    """
    lam = 1.0 - k * (k + n - 1) / (2.0 * n)
    return 2.0 * (2.0 * n) ** (lam - 1.5)


def remainder_exponent(k, n=2):
    return k + k * (k - 1) / n


def shell_points(radii, band_limit=8, center=(0.0, 0.0, 0.0), n=2):
    """Quadrature directions of the given band limit on each sphere |x - c| = s."""
    dirs = sphere_grid(band_limit, n).directions
    c = np.asarray(center, dtype=float)
    return np.concatenate([c + s * dirs for s in radii])


@dataclass
class ExpansionFit:
    T: float
    k: int
    pk_coeffs: list
    sigma: float
    radii: np.ndarray
    degree_norms: np.ndarray = field(repr=False)
    noise: float = 0.0


def expansion_fit(samples, n=2, center=None, T=None, max_degree=6, noise=None):
    """Fit ``t = T - |x|^2/(2n) + |x|^{k+k(k-1)/n} P_k(x/|x|) + ...``.

    Samples are grouped into shells of equal radius about ``center`` (the
    event point by default). The remainder on each shell is expanded in
    real harmonics up to ``max_degree`` by least squares. ``k`` is the
    dominant degree (>= 1) on the smallest shell; it is ``None`` when the
    remainder does not rise above ``10 * noise`` there.
    """
    pts = samples.points
    if center is None:
        center = samples.event[0] if samples.event else np.zeros(pts.shape[1])
    center = np.asarray(center, dtype=float)
    d = pts - center
    s = np.linalg.norm(d, axis=1)
    key = np.round(np.log(s), 9)
    radii = np.array(sorted(set(key), reverse=True))
    if T is None:
        if samples.event is not None:
            T = samples.event[1]
        else:
            small = key == radii[-1]
            T = float(np.mean(samples.times[small] + s[small] ** 2 / (2 * n)))
    L = max_degree
    kv = degree_vector(L)
    grid = sphere_grid(L, n)
    coeffs, shells = [], []
    for r in radii:
        sel = key == r
        rr = float(np.exp(r))
        B = grid.basis_at(d[sel] / s[sel, None])[0]
        rem = samples.times[sel] - T + rr * rr / (2 * n)
        a, *_ = np.linalg.lstsq(B, rem, rcond=None)
        coeffs.append(a)
        shells.append(rr)
    coeffs = np.array(coeffs)
    shells = np.array(shells)
    dn = np.array([[np.linalg.norm(a[kv == j]) for j in range(L + 1)] for a in coeffs])
    if noise is None:
        noise = float(np.nanmax(samples.errors)) if len(samples.errors) else 0.0
        noise = max(noise, 4 * np.finfo(float).eps * abs(T))
    last = dn[-1, 1:]
    if last.max() <= FLOOR_FACTOR * noise:
        return ExpansionFit(T, None, [], float("nan"), shells, dn, noise)
    k = int(np.argmax(last)) + 1
    e = remainder_exponent(k, n)
    Pk = coeffs[-1] * (kv == k) / shells[-1] ** e
    pk = [(k, int(m), float(c)) for m, c, kk in zip(order_vector(L), Pk, kv) if kk == k]
    # residual decay of what s^e P_k does not explain, relative to s^e
    res = np.array([np.linalg.norm(a - (kv == k) * Pk * rr**e) / rr**e for a, rr in zip(coeffs, shells)])
    ok = res > np.maximum(10 * noise / shells**e, 1e-10 * np.linalg.norm(Pk))
    sigma = float("nan")
    if ok.sum() >= 2:
        sigma = float(np.polyfit(np.log(shells[ok]), np.log(res[ok]), 1)[0])
    return ExpansionFit(T, k, pk, sigma, shells, dn, noise)


# -- regularity probe ------------------------------------------------------------


@dataclass
class ProbeReport:
    order: int
    verdict: str
    ladder: list
    quotients: dict
    floors: list = None
    stopped_at: float = None

    def to_json(self):
        return json.dumps({"order": self.order, "verdict": self.verdict, "ladder": list(self.ladder),
                           "quotients": self.quotients, "floors": self.floors,
                           "stopped_at": self.stopped_at}, default=float, indent=2)


def _evaluator(source, center):
    """Return f(points) -> (times, errors) and the value at the center."""
    if hasattr(source, "clock"):
        traj = source

        def f(p):
            smp = arrival_time(traj, p, reference=center if traj.clock == "mcf" else None)
            return smp.times, smp.errors

        T = float(traj.zoom[1]) if traj.clock == "rmcf" else float(np.mean(traj.meta["extinction_window"]))
        return f, T
    if isinstance(source, ArrivalSamples):
        table = {tuple(np.round(p, 12)): (t, e) for p, t, e in zip(source.points, source.times, source.errors)}

        def f(p):
            out = [table[tuple(np.round(q, 12))] for q in p]
            return np.array([o[0] for o in out]), np.array([o[1] for o in out])

        return f, float(source.event[1])

    def f(p):
        return np.asarray(source(p), dtype=float), np.zeros(len(p))

    return f, float(source(center[None, :])[0])


def probe_points(order, ladder=DEFAULT_LADDER, center=(0.0, 0.0, 0.0), frame=DEFAULT_FRAME):
    """All stencil points used by :func:`regularity_probe`."""
    c = np.asarray(center, dtype=float)
    pts = []
    for s in ladder:
        if order == 2:
            E = np.eye(3)
            for i in range(3):
                pts += [c + s * E[i], c - s * E[i]]
                for j in range(i + 1, 3):
                    pts += [c + s * (E[i] + E[j]), c + s * (E[i] - E[j]),
                            c - s * (E[i] - E[j]), c - s * (E[i] + E[j])]
        else:
            h = s / 4
            for e in frame:
                e = np.asarray(e)
                for sign in (1, -1):
                    pts += [c + sign * j * h * e for j in (1, 2, 3, 4)]
    return np.array(pts)


def regularity_probe(source, order=3, ladder=DEFAULT_LADDER, n=2, center=(0.0, 0.0, 0.0),
                     frame=DEFAULT_FRAME, T=None, hessian_tol=0.01):
    """Probe C^2 (order 2) or C^3 (order 3) regularity at ``center``.

    ``source`` is a callable ``t(points)``, :class:`ArrivalSamples` holding
    the stencil points (see :func:`probe_points`), or a trajectory.

    Order 2: central-difference Hessians at each radius, compared with
    ``-Id/n``. Order 3: along each frame direction ``e`` the quotient
    ``q(e) = Delta^3 t / h^3`` with ``h = s/4`` and nodes ``j h e``,
    ``j = 1..4``. For a C^3 function the cubic Taylor form is odd, so the
    even part ``E(e) = (q(e) + q(-e))/2`` tends to 0; a term like
    ``|x| q(x)`` leaves a direction-dependent limit. The statistic is the
    across-direction oscillation of ``E``; the floor is 10x the error of a
    third difference built from the sample error estimates.
    """
    c = np.asarray(center, dtype=float)
    f, Tc = _evaluator(source, c)
    T = Tc if T is None else T
    pts = probe_points(order, ladder, c, frame)
    vals, errs = f(pts)
    eta_mach = 4 * np.finfo(float).eps * max(abs(T), 1.0)
    if order == 2:
        per = 18
        devs, hess = [], []
        for i, s in enumerate(ladder):
            v = vals[i * per : (i + 1) * per]
            H = np.zeros((3, 3))
            pos = 0
            for a in range(3):
                tp, tm = v[pos], v[pos + 1]
                pos += 2
                H[a, a] = (tp - 2 * T + tm) / s**2
                for b in range(a + 1, 3):
                    pp, pm, mp, mm = v[pos : pos + 4]
                    pos += 4
                    H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4 * s * s)
            hess.append(H.tolist())
            devs.append(float(np.abs(H + np.eye(3) / n).max()))
        ok = devs[-1] <= hessian_tol
        verdict = "C2-consistent" if ok else "not-C2"
        return ProbeReport(2, verdict, list(ladder), {"hessian": hess, "deviation": devs})
    nd = len(frame)
    per = nd * 8
    even, osc, floors = [], [], []
    for i, s in enumerate(ladder):
        h = s / 4
        v = vals[i * per : (i + 1) * per].reshape(nd, 2, 4)
        e_ = errs[i * per : (i + 1) * per]
        d3 = v[..., 3] - 3 * v[..., 2] + 3 * v[..., 1] - v[..., 0]
        q = d3 / h**3
        E = 0.5 * (q[:, 0] + q[:, 1])
        eta = max(float(np.nanmax(e_)) if e_.size else 0.0, eta_mach)
        even.append(E.tolist())
        osc.append(float(E.max() - E.min()))
        floors.append(FLOOR_FACTOR * 8 * eta / h**3)
    resolved = [o > fl for o, fl in zip(osc, floors)]
    prefix = 0
    while prefix < len(ladder) and resolved[prefix]:
        prefix += 1
    stopped = None
    if prefix >= 3 or (prefix == len(ladder) and prefix >= 2):
        slope = float(np.polyfit(np.log(ladder[:prefix]), np.log(osc[:prefix]), 1)[0])
        verdict = "not-C3" if slope < 0.5 else "C3-consistent"
        if prefix < len(ladder):
            stopped = float(ladder[prefix])
    elif prefix == 0:
        slope = float("nan")
        verdict = "C3-consistent"
    else:
        slope = float("nan")
        verdict = "inconclusive"
        stopped = float(ladder[prefix])
    return ProbeReport(3, verdict, list(ladder),
                       {"even_parts": even, "oscillation": osc, "slope": slope,
                        "frame": [list(map(float, e)) for e in frame]}, floors, stopped)
