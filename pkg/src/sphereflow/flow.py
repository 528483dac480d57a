"""Time integration of rescaled and plain mean curvature flow for radial graphs.

Both flows are advanced with second-order exponential time differencing
(ETDRK2). For the rescaled flow the stiff part is L = Delta + 1, diagonal in
the harmonic basis, so it is integrated exactly; the state is the graph
function ``u = r - sqrt(2n)`` over the shrinking sphere. For plain MCF the
state is the profile ``r`` itself and the linear part is the sphere
Laplacian scaled by the current mean radius, refrozen every step.

Linearized flows are obtained by central differences of the nonlinear step,
so the linear and nonlinear dynamics share one discretization.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FlowError, GraphError, ShapeMismatch, TrajectoryGap
from .geometry import RadialGraph, nodal_geometry
from .harmonics import (
    SpectralField,
    degree_vector,
    eigenvalue,
    laplace_eigenvalue,
    num_coeffs,
    q_norm_coeffs,
    shrinker_radius,
    sphere_grid,
    symmetry_projector,
)

RMCF_DT = 1e-3
MCF_DT = 1e-4
FD_STEP = 1e-6


def phi_functions(z):
    """phi_1(z) = (e^z - 1)/z and phi_2(z) = (e^z - 1 - z)/z^2, stable near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    p1 = np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, np.expm1(zs) / zs)
    p2 = np.where(small, 0.5 + z / 6 + z * z / 24 + z**3 / 120, (np.expm1(zs) - zs) / (zs * zs))
    return p1, p2


@dataclass(frozen=True)
class FlowControls:
    """Integration settings shared by both flows.

    ``dt=None`` picks the per-flow default (1e-3 rescaled, 1e-4 plain MCF).
    ``symmetry`` is an optional linear projector (coefficient matrix, or a
    group name such as ``"tetrahedral"``) applied after every step to
    suppress round-off leakage out of a symmetry class.
    """

    dt: float = None
    snapshot_every: float = 0.05
    snapshot_times: tuple = None
    symmetry: object = field(default=None, repr=False, compare=False)
    min_radius: float = 1e-3
    slope_bound: float = 10.0
    max_deviation: float = None
    raise_on_failure: bool = True
    stop_inradius: float = 0.05
    cfl: float = 0.05

    def __post_init__(self):
        if self.dt is not None and not (0 < self.dt <= 0.01):
            raise ValueError(f"dt must lie in (0, 0.01], got {self.dt}")
        if self.snapshot_every <= 0:
            raise ValueError("snapshot_every must be positive")


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Time-stamped radial profiles from one flow run.

    ``clock`` is ``"rmcf"`` (rescaled time t) or ``"mcf"`` (flow time tau).
    A rescaled trajectory zooms into the spacetime point ``zoom = (x0, T0)``:
    the physical surface at ``tau = T0 - exp(-t)`` is ``x0 + exp(-t/2) M_t``.
    """

    times: np.ndarray
    profiles: np.ndarray
    centers: np.ndarray
    clock: str
    dt: float
    n: int = 2
    zoom: tuple = ((0.0, 0.0, 0.0), 1.0)
    symmetry: np.ndarray = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if self.clock not in ("rmcf", "mcf"):
            raise ValueError("clock must be 'rmcf' or 'mcf'")

    @property
    def band_limit(self):
        return int(math.isqrt(self.profiles.shape[1]) - 1)

    def __len__(self):
        return len(self.times)

    def graph(self, i):
        return RadialGraph(SpectralField(self.profiles[i], self.n), self.centers[i])

    @property
    def snapshots(self):
        return [(float(t), self.graph(i)) for i, t in enumerate(self.times)]

    def graph_functions(self):
        """Coefficients of ``u = r - sqrt(2n)`` for every snapshot, (nsnap, ncoef)."""
        shift = SpectralField.constant(shrinker_radius(self.n), self.band_limit, self.n).coeffs
        return self.profiles - shift

    def graph_function(self, i):
        return SpectralField(self.graph_functions()[i], self.n)

    def index_of(self, t, tol=1e-9):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise TrajectoryGap(f"time {t} is not a stored snapshot")
        return i

    def slice(self, t0=None, t1=None):
        t = self.times
        sel = np.ones(t.size, bool)
        if t0 is not None:
            sel &= t >= t0 - 1e-12
        if t1 is not None:
            sel &= t <= t1 + 1e-12
        return replace(self, times=t[sel], profiles=self.profiles[sel], centers=self.centers[sel])


class RMCFStepper:
    """ETDRK2 step for the rescaled flow on a batch of graph functions."""

    def __init__(self, band_limit, dt, n=2, symmetry=None):
        self.grid = sphere_grid(band_limit, n)
        self.n = n
        self.dt = dt
        self.radius = shrinker_radius(n)
        lam = eigenvalue(degree_vector(band_limit), n)
        self.lam = lam[:, None]
        p1, p2 = phi_functions(dt * lam)
        self.E = np.exp(dt * lam)[:, None]
        self.c1 = (dt * p1)[:, None]
        self.c2 = (dt * p2)[:, None]
        self.symmetry = symmetry

    def velocity(self, u):
        """Radial velocity -W phi analyzed onto the band, with validity data."""
        d = self.grid.synthesize_derivatives(u)
        d[0] += self.radius
        H, W, slope, _ = nodal_geometry(d, self.grid, self.n)
        phi = H - 0.5 * d[0] / W
        return self.grid.analyze(-W * phi), d[0].min(axis=0), slope.max(axis=0)

    def nonlinear(self, u):
        F, rmin, slope = self.velocity(u)
        return F - self.lam * u, rmin, slope

    def step(self, u):
        N0, rmin, slope = self.nonlinear(u)
        a = self.E * u + self.c1 * N0
        Na, _, _ = self.nonlinear(a)
        out = a + self.c2 * (Na - N0)
        if self.symmetry is not None:
            out = self.symmetry @ out
        return out, rmin, slope


def _snapshot_steps(horizon, dt, controls):
    """Integer step counts at which snapshots are taken, plus the step sizes."""
    if controls.snapshot_times is not None:
        marks = np.asarray(sorted(controls.snapshot_times), dtype=float)
        marks = marks[(marks > 0) & (marks <= horizon + 1e-12)]
    else:
        marks = np.arange(1, int(round(horizon / controls.snapshot_every)) + 1) * controls.snapshot_every
        marks = marks[marks <= horizon + 1e-12]
    if marks.size == 0 or abs(marks[-1] - horizon) > 1e-12:
        marks = np.append(marks, horizon)
    steps = np.maximum(np.round(marks / dt).astype(int), 1)
    return np.unique(steps)


def integrate_rmcf(u0, horizon, dt=RMCF_DT, snapshot_every=0.05, symmetry=None,
                   min_radius=1e-3, slope_bound=10.0, max_deviation=None, snapshot_steps=None):
    """Batched rescaled-flow integration of graph functions.

    ``u0`` has shape ``(ncoef, B)``. Returns ``(times, states, ok)`` with
    ``states`` of shape ``(nsnap + 1, ncoef, B)`` including the initial state;
    columns that leave the graph regime are frozen and flagged in ``ok``
    (``ok[b]`` is the last valid snapshot index for column ``b``).
    """
    u = np.array(u0, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    L = int(math.isqrt(u.shape[0]) - 1)
    stepper = RMCFStepper(L, dt, symmetry=symmetry)
    if snapshot_steps is None:
        snapshot_steps = _snapshot_steps(horizon, dt, FlowControls(snapshot_every=snapshot_every))
    nsteps = int(snapshot_steps[-1])
    out = [u.copy()]
    times = [0.0]
    alive = np.ones(u.shape[1], bool)
    last_ok = np.zeros(u.shape[1], int)
    marks = set(int(s) for s in snapshot_steps)
    vals = stepper.grid.synthesize(u)
    for k in range(1, nsteps + 1):
        new, rmin, slope = stepper.step(u)
        new_vals = stepper.grid.synthesize(new)
        bad = (rmin <= min_radius) | (slope >= slope_bound) | ~np.all(np.isfinite(new), axis=0)
        # post-step checks: collapse through the origin, or a step too large to resolve
        bad |= new_vals.min(axis=0) + stepper.radius <= min_radius
        bad |= np.abs(new_vals - vals).max(axis=0) > 0.5 * rmin
        if max_deviation is not None:
            bad |= np.abs(new_vals).max(axis=0) > max_deviation
        newly = bad & alive
        if np.any(newly):
            alive &= ~newly
        new[:, ~alive] = u[:, ~alive]
        new_vals[:, ~alive] = vals[:, ~alive]
        u, vals = new, new_vals
        if k in marks:
            out.append(u.copy())
            times.append(k * dt)
            last_ok[alive] = len(out) - 1
        if not np.any(alive):
            break
    return np.array(times), np.array(out), last_ok


def _resolve(controls, default_dt):
    controls = controls or FlowControls()
    return controls, (controls.dt if controls.dt is not None else default_dt)


def step_rmcf(G, dt=RMCF_DT, symmetry=None):
    """Advance a graph one ETDRK2 step of the rescaled flow."""
    if not (0 < dt <= 0.01):
        raise ValueError(f"dt must lie in (0, 0.01], got {dt}")
    if np.any(G.center):
        raise GraphError("the rescaled flow is written for graphs about the origin")
    u = G.graph_function().coeffs[:, None]
    stepper = RMCFStepper(G.band_limit, dt, G.n, symmetry)
    new, _, _ = stepper.step(u)
    shift = SpectralField.constant(stepper.radius, G.band_limit, G.n)
    return RadialGraph(SpectralField(new[:, 0], G.n) + shift, G.center, G.slope_bound)


def evolve_rmcf(G, horizon, controls=None):
    """Rescaled flow from ``G`` over ``[0, horizon]``.

    Raises :class:`FlowError` (with the trajectory up to the last valid
    snapshot) if the graph property is lost, unless
    ``controls.raise_on_failure`` is false, in which case the truncated
    trajectory is returned with ``meta['stopped']`` set.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if np.any(G.center):
        raise GraphError("the rescaled flow is written for graphs about the origin")
    controls, dt = _resolve(controls, RMCF_DT)
    steps = _snapshot_steps(horizon, dt, controls)
    symmetry, sym_name = controls.symmetry, None
    if isinstance(symmetry, str):
        sym_name = symmetry
        symmetry = symmetry_projector(symmetry, G.band_limit, G.n)
    times, states, last_ok = integrate_rmcf(
        G.graph_function().coeffs, horizon, dt, symmetry=symmetry,
        min_radius=controls.min_radius, slope_bound=controls.slope_bound,
        max_deviation=controls.max_deviation, snapshot_steps=steps,
    )
    keep = int(last_ok[0]) + 1
    shift = SpectralField.constant(shrinker_radius(G.n), G.band_limit, G.n).coeffs
    profiles = states[:keep, :, 0] + shift
    traj = FlowTrajectory(
        times[:keep], profiles, np.zeros((keep, 3)), "rmcf", dt, G.n,
        symmetry=symmetry, meta={"horizon": horizon},
    )
    if sym_name:
        traj.meta["symmetry"] = sym_name
    if keep < len(times) or times[keep - 1] < horizon - 1e-9:
        msg = f"graph regime lost after t = {traj.times[-1]:.4f}"
        traj.meta["stopped"] = msg
        if controls.raise_on_failure:
            raise FlowError(msg, traj)
    return traj


class MCFStepper:
    """ETDRK2 step for plain MCF of a radial profile (single surface)."""

    def __init__(self, band_limit, n=2):
        self.grid = sphere_grid(band_limit, n)
        self.n = n
        k = np.arange(band_limit + 1)
        self.mu = k * (k + n - 1.0)  # -Delta on the unit sphere, per degree
        self.deg = degree_vector(band_limit)
        self.mean_factor = 1.0 / (math.sqrt(4 * math.pi) * shrinker_radius(n))

    def velocity(self, r):
        d = self.grid.synthesize_derivatives(r)
        H, W, slope, _ = nodal_geometry(d, self.grid, self.n)
        return self.grid.analyze(-W * H), d[0].min(), slope.max()

    def step(self, r, dt):
        mean_r = r[0] * self.mean_factor
        lam_k = -self.mu / mean_r**2
        p1, p2 = phi_functions(dt * lam_k)
        lam, p1, p2, E = lam_k[self.deg], p1[self.deg], p2[self.deg], np.exp(dt * lam_k)[self.deg]
        F0, rmin, slope = self.velocity(r)
        N0 = F0 - lam * r
        a = E * r + dt * p1 * N0
        Fa, _, _ = self.velocity(a)
        return a + dt * p2 * (Fa - lam * a - N0), rmin, slope


@dataclass(frozen=True)
class MCFResult:
    trajectory: FlowTrajectory
    extinction_window: tuple


def evolve_mcf(G, controls=None, max_time=None):
    """Mean curvature flow until the inradius drops below ``controls.stop_inradius``.

    Returns the trajectory and a rigorous bracket for the extinction time
    from the avoidance principle: the surface lies between spheres of radii
    ``r_min`` and ``r_max`` about the ray origin.
    """
    controls, dt0 = _resolve(controls, MCF_DT)
    stepper = MCFStepper(G.band_limit, G.n)
    r = G.profile.coeffs.copy()
    center = G.center.copy()
    tau = 0.0
    times, profiles, centers = [0.0], [r.copy()], [center.copy()]
    next_snap = controls.snapshot_every
    targets = None if controls.snapshot_times is None else sorted(controls.snapshot_times)
    mean_factor = stepper.mean_factor
    max_time = np.inf if max_time is None else max_time
    stopped = None
    nstep = 0
    snap_rmin = stepper.grid.synthesize(r).min()
    while True:
        vals = stepper.grid.synthesize(r)
        rmin, rmax = vals.min(), vals.max()
        if rmin < controls.stop_inradius or tau >= max_time - 1e-15:
            break
        dt = min(dt0, controls.cfl * rmin**2)
        if targets:
            while targets and targets[0] <= tau + 1e-15:
                targets.pop(0)
            if targets and tau + dt > targets[0]:
                dt = targets[0] - tau
        if tau + dt > max_time:
            dt = max_time - tau
        mean_before = r[0] * mean_factor
        new, _, slope = stepper.step(r, dt)
        if slope >= controls.slope_bound or not np.all(np.isfinite(new)):
            stopped = f"graph regime lost at tau = {tau:.6f}"
            break
        if new[0] * mean_factor > mean_before:
            raise FlowError("outward motion detected: input is not shrinking",
                            _mcf_traj(times, profiles, centers, dt0, G.n))
        r = new
        tau += dt
        if targets is not None:
            snap = any(abs(tau - s) < 1e-12 for s in controls.snapshot_times)
        else:
            # regular cadence, densified geometrically as the surface shrinks
            snap = tau >= next_snap - 1e-12 or rmin < 0.8 * snap_rmin
        if snap:
            snap_rmin = rmin
            times.append(tau)
            profiles.append(r.copy())
            centers.append(center.copy())
            while next_snap <= tau + 1e-12:
                next_snap += controls.snapshot_every
        nstep += 1
        if nstep % 10 == 0:
            # keep the ray origin well inside the shrinking surface
            g = RadialGraph(SpectralField(r, G.n), center, np.inf)
            c = g.centroid()
            if np.linalg.norm(c - center) > 0.1 * rmin:
                g = g.recentered(c)
                r = g.profile.coeffs.copy()
                center = g.center.copy()
    if times[-1] < tau:
        times.append(tau)
        profiles.append(r.copy())
        centers.append(center.copy())
    vals = stepper.grid.synthesize(r)
    window = (tau + vals.min() ** 2 / (2 * G.n), tau + vals.max() ** 2 / (2 * G.n))
    traj = _mcf_traj(times, profiles, centers, dt0, G.n)
    if stopped:
        traj.meta["stopped"] = stopped
        if controls.raise_on_failure:
            raise FlowError(stopped, traj)
    traj.meta["extinction_window"] = window
    return MCFResult(traj, window)


def _mcf_traj(times, profiles, centers, dt, n):
    return FlowTrajectory(np.array(times), np.array(profiles), np.array(centers), "mcf", dt, n)


# -- linearized flow ---------------------------------------------------------


def _fd_scale(u, V, n):
    unorm = q_norm_coeffs(u[:, None], n)[0]
    vnorm = q_norm_coeffs(V, n)
    vnorm = np.where(vnorm > 0, vnorm, 1.0)
    return FD_STEP * max(unorm, 1.0) / vnorm


def _linear_run(traj, V0, t0, t1):
    """Propagate columns of V0 along the stored trajectory from t0 to t1.

    The base state is replayed from the snapshot at t0 in lockstep with
    central-difference directional derivatives of the nonlinear step.
    Returns snapshot times and ``(nt, ncoef, m)`` linearized states.
    """
    if traj.clock != "rmcf":
        raise ValueError("linearized flow needs a rescaled-flow trajectory")
    i0 = traj.index_of(t0)
    i1 = traj.index_of(t1)
    if i1 < i0:
        raise TrajectoryGap("t1 must not precede t0")
    u = traj.graph_functions()[i0].copy()
    V = np.array(V0, dtype=float)
    # perturbations are not symmetric: only the base replay is projected
    stepper = RMCFStepper(traj.band_limit, traj.dt, traj.n)
    sym = traj.symmetry
    times = [traj.times[i0]]
    out = [V.copy()]
    m = V.shape[1]
    for i in range(i0 + 1, i1 + 1):
        nsteps = int(round((traj.times[i] - traj.times[i - 1]) / traj.dt))
        for _ in range(nsteps):
            eps = _fd_scale(u, V, traj.n)
            batch = np.concatenate([u[:, None], u[:, None] + eps * V, u[:, None] - eps * V], axis=1)
            new, _, _ = stepper.step(batch)
            u = new[:, 0] if sym is None else sym @ new[:, 0]
            V = (new[:, 1 : m + 1] - new[:, m + 1 :]) / (2 * eps)
        times.append(traj.times[i])
        out.append(V.copy())
    return np.array(times), np.array(out)


def linear_propagator(traj, v0, t0=None, t1=None):
    """Solve the linearized rescaled flow along ``traj`` from initial data ``v0``.

    Returns ``(times, fields)`` at the stored snapshot times in ``[t0, t1]``.
    """
    t0 = traj.times[0] if t0 is None else t0
    t1 = traj.times[-1] if t1 is None else t1
    c = v0.coeffs if isinstance(v0, SpectralField) else np.asarray(v0)
    if c.shape[0] != traj.profiles.shape[1]:
        raise ShapeMismatch("perturbation band limit does not match trajectory")
    times, V = _linear_run(traj, c[:, None], t0, t1)
    return times, [SpectralField(v[:, 0], traj.n) for v in V]


def weighted_gram(G):
    """Gram matrix of the basis in the Gaussian-weighted L^2(M) inner product.

    Functions on M are identified with functions of direction through the
    radial correspondence. The weight ``exp(-|x|^2/4) dmu`` is normalized by
    its constant value on the shrinking sphere, so the Gram matrix of the
    sphere itself is the identity.
    """
    grid = G.grid
    n = G.n
    R = shrinker_radius(n)
    d = G.derivatives()
    _, W, _, _ = nodal_geometry(d, grid, n)
    x = G.points()
    ratio = np.exp(-(np.einsum("ij,ij->i", x, x) - R * R) / 4) * (d[0] / R) ** n * W
    B = grid.synthesize(np.eye(grid.num_coeffs))
    return B.T @ (B * (grid.area_weights * ratio)[:, None])


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Matrix of the linearized flow T(t1, t0) in the harmonic basis.

    ``gram0`` and ``gram1`` are the weighted L^2 Gram matrices at both ends.
    """

    matrix: np.ndarray
    t0: float
    t1: float
    gram0: np.ndarray
    gram1: np.ndarray
    n: int = 2
    columns: np.ndarray = None

    @property
    def is_square(self):
        return self.matrix.shape[0] == self.matrix.shape[1]

    @property
    def singular_values(self):
        return np.linalg.svd(self.matrix, compute_uv=False)

    def apply(self, v):
        return SpectralField(self.matrix @ v.coeffs, self.n)

    def adjoint_matrix(self):
        """T* = G0^{-1} T^T G1, the adjoint between weighted L^2 spaces."""
        if not self.is_square:
            raise ValueError("the adjoint needs the full (square) propagator")
        return np.linalg.solve(self.gram0, self.matrix.T @ self.gram1)

    def adjoint(self, w):
        return SpectralField(self.adjoint_matrix() @ w.coeffs, self.n)

    def duhamel_check(self, v, u):
        """|<v, T u>_{t1} - <T* v, u>_{t0}| relative to the product of norms."""
        lhs = v.coeffs @ self.gram1 @ (self.matrix @ u.coeffs)
        rhs = (self.adjoint_matrix() @ v.coeffs) @ self.gram0 @ u.coeffs
        scale = max(abs(lhs), abs(rhs), 1e-300)
        return abs(lhs - rhs) / scale


def propagator_matrix(traj, t0=None, t1=None, max_degree=None):
    """Assemble T(t1, t0) column by column (one batched linearized run).

    ``max_degree`` restricts the assembled columns to initial data of degree
    ``<= max_degree`` (the matrix is then ``ncoef x ncol``).
    """
    t0 = traj.times[0] if t0 is None else t0
    t1 = traj.times[-1] if t1 is None else t1
    N = traj.profiles.shape[1]
    cols = np.arange(N)
    if max_degree is not None:
        cols = np.nonzero(degree_vector(traj.band_limit) <= max_degree)[0]
    _, V = _linear_run(traj, np.eye(N)[:, cols], t0, t1)
    g0 = weighted_gram(traj.graph(traj.index_of(t0)))
    g1 = weighted_gram(traj.graph(traj.index_of(t1)))
    return PropagatorMatrix(V[-1], float(t0), float(t1), g0, g1, traj.n, cols)


def adjoint_propagator(traj, w, t0=None, t1=None, matrix=None):
    """Carry ``w`` (at t1) back to t0 with the discrete adjoint."""
    P = matrix if matrix is not None else propagator_matrix(traj, t0, t1)
    return P.adjoint(w), P


def rhs_jacobian(u, n=2):
    """Jacobian of the rescaled-flow velocity at ``u`` by central differences."""
    N = u.size
    L = int(math.isqrt(N) - 1)
    stepper = RMCFStepper(L, RMCF_DT, n)
    h = FD_STEP * max(q_norm_coeffs(u[:, None], n)[0], 1.0)
    w = 1.0 / np.sqrt(q_norm_coeffs(np.eye(N), n) ** 2)
    cols = np.eye(N) * (h * w)
    F, _, _ = stepper.velocity(np.concatenate([u[:, None] + cols, u[:, None] - cols], axis=1))
    return (F[:, :N] - F[:, N:]) / (2 * h * w)


def pde_adjoint(traj, w, t0=None, t1=None, dt=None):
    """Backward integration of the conjugate linearized equation (cross-check).

    Integrates ``w' = -G^{-1}(J^T G + dG/dt) w`` from t1 down to t0 with RK4,
    where ``J`` is the Jacobian of the continuous velocity along the base flow
    and ``G`` the weighted Gram matrix. The base flow is replayed at every
    integration step from the stored snapshot at t0.
    """
    t0 = traj.times[0] if t0 is None else t0
    t1 = traj.times[-1] if t1 is None else t1
    dt = traj.dt if dt is None else dt
    i0 = traj.index_of(t0)
    stepper = RMCFStepper(traj.band_limit, dt / 2, traj.n, traj.symmetry)
    # base states on a half-step lattice
    u = traj.graph_functions()[i0].copy()
    nsteps = int(round((t1 - t0) / dt))
    states = [u.copy()]
    for _ in range(2 * nsteps):
        u = stepper.step(u[:, None])[0][:, 0]
        states.append(u.copy())
    shift = SpectralField.constant(shrinker_radius(traj.n), traj.band_limit, traj.n)

    def gram(c):
        return weighted_gram(RadialGraph(SpectralField(c, traj.n) + shift, slope_bound=np.inf))

    grams = [gram(s) for s in states]
    jacs = [rhs_jacobian(s, traj.n) for s in states]
    h = dt / 2

    def rate(j):
        dG = (grams[min(j + 1, len(grams) - 1)] - grams[max(j - 1, 0)]) / (
            h * (min(j + 1, len(grams) - 1) - max(j - 1, 0)))
        return -np.linalg.solve(grams[j], jacs[j].T @ grams[j] + dG)

    rates = [rate(j) for j in range(len(states))]
    x = np.asarray(w.coeffs if isinstance(w, SpectralField) else w, dtype=float)
    for k in range(nsteps, 0, -1):
        j1, jm, j0 = 2 * k, 2 * k - 1, 2 * k - 2
        k1 = rates[j1] @ x
        k2 = rates[jm] @ (x - 0.5 * dt * k1)
        k3 = rates[jm] @ (x - 0.5 * dt * k2)
        k4 = rates[j0] @ (x - dt * k3)
        x = x - dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SpectralField(x, traj.n)
