"""Spectral diagnostics of rescaled-flow trajectories.

Cone membership and growth, decay-rate fits with dominant-mode extraction,
slow/fast classification of spherical singularities, and the perturbation
designer that steers a linearized flow into the degree-2 eigenspace.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FitError
from .harmonics import (
    LAMBDA_Q,
    SpectralField,
    degree_vector,
    eigenvalue,
    flat_index,
    num_coeffs,
    order_vector,
    projection_mask,
    q_weights,
)

RATE_TOL = 0.05
WINDOW_FRACTION = 0.4
NORM_FLOOR = 1e-8
NORM_CEIL = 1e-2


# -- cones -------------------------------------------------------------------


@dataclass(frozen=True)
class ConeQuery:
    """Cone K_kappa (axis X+ + X2) or K+_kappa (axis X+)."""

    kappa: float
    kind: str = "K+"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.kind not in ("K", "K+"):
            raise ValueError("kind must be 'K' or 'K+'")


def _part_norms(c, n=2, lam=LAMBDA_Q):
    """Q-norms of the X+, X2 and X- parts of coefficient arrays (leading axis)."""
    c = np.asarray(c, dtype=float)
    L = int(math.isqrt(c.shape[0]) - 1)
    w = q_weights(L, n, lam).reshape((-1,) + (1,) * (c.ndim - 1))
    sq = w * c * c
    k = degree_vector(L)
    return tuple(np.sqrt(sq[(k <= 1) if p == 0 else (k == 2) if p == 1 else (k >= 3)].sum(axis=0))
                 for p in range(3))


def cone_split(u, kind="K+", n=2):
    """(axis norm, complement norm) for the given cone kind."""
    c = u.coeffs if isinstance(u, SpectralField) else u
    n = u.n if isinstance(u, SpectralField) else n
    plus, two, minus = _part_norms(c, n)
    if kind == "K+":
        return plus, np.hypot(two, minus)
    return np.hypot(plus, two), minus


def cone_parameter(u, kind="K+", n=2):
    """Largest kappa for which ``u`` lies in the cone (inf if complement vanishes)."""
    axis, comp = cone_split(u, kind, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(comp > 0, axis / np.where(comp > 0, comp, 1.0), np.inf)


def cone_membership(u, q):
    """Return ``(member, margin)`` with margin = |axis| - kappa |complement|."""
    axis, comp = cone_split(u, q.kind)
    margin = float(axis - q.kappa * comp)
    scale = max(float(axis), float(q.kappa * comp), 1e-300)
    return margin >= -1e-12 * scale, margin


@dataclass
class ConeGrowthReport:
    kind: str
    times: list
    kappas: list
    factors: list
    floor: float
    cap: float
    violations: list
    empirical_cap: float

    @property
    def passed(self):
        return not self.violations


def cone_growth_check(traj_a, traj_b, kappa0=None, m=None, kind="K+", cap=np.inf, delta0=None):
    """Track the cone parameter of u_a - u_b at integer times.

    Asserts ``kappa(j+1) >= min(rate * kappa(j), cap)`` with rate e^{1/4}
    for K+ and e^{1/n} for K. ``kappa0`` if given checks the initial
    difference lies in the starting cone. Raises ``ValueError`` if either
    flow leaves the ``delta0`` regime.
    """
    n = traj_a.n
    rate = math.exp(0.25) if kind == "K+" else math.exp(1.0 / n)
    m = int(math.floor(min(traj_a.times[-1], traj_b.times[-1]) + 1e-9)) if m is None else m
    ua, ub = traj_a.graph_functions(), traj_b.graph_functions()
    times, kappas = [], []
    w = q_weights(traj_a.band_limit, n)
    for j in range(m + 1):
        ia, ib = traj_a.index_of(j), traj_b.index_of(j)
        if delta0 is not None:
            big = max(np.sqrt(w @ ua[ia] ** 2), np.sqrt(w @ ub[ib] ** 2))
            if big > delta0:
                raise ValueError(f"flow leaves the delta0 regime at t = {j}: |u|_Q = {big:.3e}")
        times.append(j)
        kappas.append(float(cone_parameter(ua[ia] - ub[ib], kind, n)))
    # profiles store sqrt(2n) + u, so differences carry ~1e-12 relative round-off
    if kappa0 is not None and kappas[0] < kappa0 * (1 - 1e-9):
        raise ValueError(f"initial difference not in the cone: kappa = {kappas[0]:.4g} < {kappa0}")
    factors, violations = [], []
    for j in range(m):
        k0, k1 = kappas[j], kappas[j + 1]
        factors.append(k1 / k0 if np.isfinite(k0) and k0 > 0 else np.inf)
        need = min(rate * k0, cap)
        if k1 < need * (1 - 1e-9):
            violations.append((j, k0, k1))
    finite = [k for k in kappas if np.isfinite(k)]
    return ConeGrowthReport(kind, times, kappas, factors, rate, cap, violations,
                            max(finite) if finite else np.inf)


# -- decay fits ----------------------------------------------------------------


@dataclass
class SingularityReport:
    """Outcome of a decay fit / classification (JSON-serializable)."""

    dominant_degree: int
    decay_rate: float
    pk_coeffs: list
    gap: float
    verdict: str
    window: tuple
    residuals: dict = field(default_factory=dict)

    def pk_field(self, band_limit, n=2):
        c = np.zeros(num_coeffs(band_limit))
        for k, m, v in self.pk_coeffs:
            c[flat_index(k, m)] = v
        return SpectralField(c, n)

    def to_json(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return json.dumps(d, indent=2, default=float)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["window"] = tuple(d["window"])
        d["pk_coeffs"] = [tuple(x) for x in d["pk_coeffs"]]
        return cls(**d)


def _series(source):
    """(times, coeffs (nt, ncoef), n) from a trajectory or a (times, coeffs) pair."""
    if hasattr(source, "graph_functions"):
        return np.asarray(source.times), source.graph_functions(), source.n
    times, coeffs = source[:2]
    n = source[2] if len(source) > 2 else 2
    coeffs = np.array([c.coeffs if isinstance(c, SpectralField) else c for c in coeffs])
    return np.asarray(times, dtype=float), coeffs, n


def _lsq_slope(t, y):
    A = np.stack([t, np.ones_like(t)], axis=1)
    sol, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ sol
    return sol[0], sol[1], float(np.sqrt(np.mean((y - fit) ** 2)))


def decay_rate(source, window=None, part="decaying", floor=NORM_FLOOR, ceil=NORM_CEIL,
               require_monotone=True):
    """Fit the exponential rate and dominant mode of a trajectory.

    ``part="decaying"`` fits ``||(pi_2 + pi_-) u||_Q`` (the unstable X+ part
    is reported separately); ``part="all"`` fits the full norm. Without an
    explicit ``window`` the last 40% of the trajectory is used, restricted
    to norms in ``[floor, ceil]``; if fewer than three snapshots survive,
    the last 40% of the in-band stretch is used instead.

    Returns a :class:`SingularityReport` with verdict ``"n/a"``.
    """
    t, C, n = _series(source)
    L = int(math.isqrt(C.shape[1]) - 1)
    k = degree_vector(L)
    w = q_weights(L, n)
    mask = (k >= 2) if part == "decaying" else np.ones_like(k, bool)
    norms = np.sqrt((w * C * C * mask).sum(axis=1))
    if not np.any(norms > 0):
        raise FitError("all-zero field")
    if window is None:
        band = (norms >= floor) & (norms <= ceil)
        t0 = t[0] + (1 - WINDOW_FRACTION) * (t[-1] - t[0])
        sel = (t >= t0 - 1e-12) & band
        if sel.sum() < 3 and band.sum() >= 3:
            # fast decay left the band early: use the tail of the in-band stretch
            tb = t[band]
            t0 = tb[0] + (1 - WINDOW_FRACTION) * (tb[-1] - tb[0])
            sel = (t >= t0 - 1e-12) & band
    else:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12) & (norms > 0)
    if sel.sum() < 3:
        raise FitError(f"fit window holds {int(sel.sum())} usable snapshots; need at least 3")
    tw, nw = t[sel], norms[sel]
    if require_monotone:
        d = np.diff(nw)
        if not (np.all(d < 0) or np.all(d > 0)):
            raise FitError("norm is not monotone on the fit window (window too early?)")
    rate, _, rms = _lsq_slope(tw, np.log(nw))

    last = np.nonzero(sel)[0][-1]
    u_last = C[last]
    dnorm = np.array([np.sqrt((w * u_last * u_last)[(k == j) & mask].sum()) for j in range(L + 1)])
    kd = int(np.argmax(dnorm))
    lam_k = eigenvalue(kd, n)
    Pk = np.where(k == kd, u_last, 0.0) * math.exp(-lam_k * t[last])
    pk_coeffs = [(kd, int(m), float(c)) for m, c, kk in zip(order_vector(L), Pk, k) if kk == kd]

    # gap from the decay of what the dominant mode does not explain
    model = np.exp(lam_k * tw)[:, None] * Pk[None, :]
    resid = np.sqrt((w * (C[sel] - model) ** 2 * mask).sum(axis=1))
    rel = resid / nw
    ok = rel > 1e-10
    gap = float("nan")
    if ok.sum() >= 3:
        rs, _, _ = _lsq_slope(tw[ok], np.log(resid[ok]))
        gap = float(lam_k - rs)
    part_norms = _part_norms(C[sel].T, n)
    residuals = {
        "log_fit_rms": rms,
        "window_points": int(sel.sum()),
        "plus_norm_end": float(part_norms[0][-1]),
        "two_norm_end": float(part_norms[1][-1]),
        "minus_norm_end": float(part_norms[2][-1]),
        "part": part,
    }
    return SingularityReport(kd, float(rate), pk_coeffs, gap, "n/a",
                             (float(tw[0]), float(tw[-1])), residuals)


def classify_singularity(source, window=None, rate_tol=RATE_TOL):
    """Slow / fast / indeterminate verdict from the decaying part of the flow.

    slow: dominant degree 2 with rate within ``rate_tol`` of -1/n;
    fast: dominant degree >= 3; indeterminate when the degree-2 and
    degree->=3 norms agree within a factor 2 at the end of the window.
    """
    rep = decay_rate(source, window, part="decaying")
    n = _series(source)[2]
    two, minus = rep.residuals["two_norm_end"], rep.residuals["minus_norm_end"]
    lo, hi = sorted((two, minus))
    if hi <= 2 * lo:
        verdict = "indeterminate"
    elif rep.dominant_degree == 2:
        verdict = "slow" if abs(rep.decay_rate + 1.0 / n) <= rate_tol else "indeterminate"
    else:
        verdict = "fast"
    rep.verdict = verdict
    return rep


# -- perturbation design --------------------------------------------------------


@dataclass
class DesignResult:
    perturbation: SpectralField
    ratio: float
    rank: int
    singular_values: np.ndarray = field(repr=False)


def design_perturbation(propagator, budget=1.0, max_degree=None, exclude_degrees=(), rtol=1e-12,
                        target_ratio=None):
    """Maximize ``||pi_2 T v||_Q / ||T v||_Q`` over ``||v||_{L2} = budget``.

    ``propagator`` is a :class:`PropagatorMatrix` (or a plain matrix). The
    search space can be restricted to degrees ``<= max_degree`` and away
    from ``exclude_degrees``. Solved by truncated SVD of ``Q^{1/2} T`` and
    a symmetric eigenproblem for the degree-2 share in its range.
    """
    M = getattr(propagator, "matrix", propagator)
    n = getattr(propagator, "n", 2)
    N = M.shape[0]
    L = int(math.isqrt(N) - 1)
    k = degree_vector(L)
    assembled = getattr(propagator, "columns", None)
    if assembled is not None and len(assembled) != N:
        full = np.zeros((N, N))
        full[:, assembled] = M
        M = full
        cols = np.zeros(N, bool)
        cols[assembled] = True
    else:
        cols = np.ones(N, bool)
    if max_degree is not None:
        cols &= k <= max_degree
    for d in exclude_degrees:
        cols &= k != d
    qh = np.sqrt(q_weights(L, n))
    A = qh[:, None] * M[:, cols]
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    if r == 0:
        raise FitError("propagator has no numerically nonzero singular values")
    Ur, sr, Vr = U[:, :r], s[:r], Vt[:r].T
    two = projection_mask("two", L)
    B = Ur[two].T @ Ur[two]
    vals, vecs = np.linalg.eigh(B)
    y = vecs[:, -1]
    z = Vr @ (y / sr)
    v = np.zeros(N)
    v[cols] = z
    v *= budget / np.linalg.norm(v)
    ratio = float(math.sqrt(max(vals[-1], 0.0)))
    if target_ratio is not None and ratio < target_ratio:
        raise FitError(f"achieved degree-2 share {ratio:.4f} below target {target_ratio}")
    return DesignResult(SpectralField(v, n), ratio, r, s)


def two_share(u):
    """||pi_2 u||_Q / ||u||_Q."""
    plus, two, minus = _part_norms(u.coeffs, u.n)
    total = math.sqrt(plus**2 + two**2 + minus**2)
    return two / total if total > 0 else 0.0
