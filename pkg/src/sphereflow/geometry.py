"""Radial graphs over the sphere: curvature, similarity actions, transplantation.

A :class:`RadialGraph` is the star-shaped surface ``{c + r(w) w : |w| = 1}``.
All nodal formulas below are written in terms of ``rho = log r`` and its
derivatives on the unit sphere; with ``W = sqrt(1 + |grad rho|^2)`` the
outward normal is ``(w - grad rho) / W`` and the mean curvature is

    H = (n - Lap(rho) + Hess(rho)(grad rho, grad rho) / W^2) / (r W).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError, ShapeMismatch
from .harmonics import SpectralField, shrinker_radius, sphere_grid

SLOPE_BOUND = 10.0
RAY_TOL = 1e-13


def _rho_derivatives(d):
    """Convert nodal derivatives of r into derivatives of log r."""
    r, rt, rp, rtt, rtp, rpp = d
    inv = 1.0 / r
    gt, gp = rt * inv, rp * inv
    return r, gt, gp, rtt * inv - gt * gt, rtp * inv - gt * gp, rpp * inv - gp * gp


def nodal_geometry(d, grid, n=2):
    """Mean curvature, W and |grad rho| from nodal r-derivatives.

    ``d`` is the output of :meth:`SphereGrid.synthesize_derivatives` applied
    to the radial profile; any trailing batch axis is carried through.
    """
    r, gt, gp, htt, htp_raw, hpp_raw = _rho_derivatives(d)
    s, cot = grid.node_sin, grid.node_cot
    if r.ndim == 2:
        s, cot = s[:, None], cot[:, None]
    gp_s = gp / s
    grad2 = gt * gt + gp_s * gp_s
    htp = htp_raw - cot * gp
    hpp = hpp_raw + s * s * cot * gt
    lap = htt + hpp / (s * s)
    hgg = htt * gt * gt + 2 * htp * gt * gp_s / s + hpp * gp_s * gp_s / (s * s)
    W2 = 1.0 + grad2
    W = np.sqrt(W2)
    H = (n - lap + hgg / W2) / (r * W)
    return H, W, np.sqrt(grad2), (gt, gp_s)


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Star-shaped surface given by its radial profile about ``center``."""

    profile: SpectralField
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    slope_bound: float = SLOPE_BOUND

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        self.validate()

    @property
    def n(self):
        return self.profile.n

    @property
    def grid(self):
        return self.profile.grid

    @property
    def band_limit(self):
        return self.profile.band_limit

    @classmethod
    def sphere(cls, radius=None, band_limit=16, center=None, n=2):
        radius = shrinker_radius(n) if radius is None else radius
        prof = SpectralField.constant(radius, band_limit, n)
        return cls(prof, np.zeros(3) if center is None else center)

    @classmethod
    def from_graph_function(cls, u, radius=None, center=None):
        """Graph of ``u`` over the sphere of the given radius (default sqrt(2n))."""
        radius = shrinker_radius(u.n) if radius is None else radius
        prof = SpectralField.constant(radius, u.band_limit, u.n) + u
        return cls(prof, np.zeros(3) if center is None else center)

    @classmethod
    def from_radius_function(cls, func, band_limit=16, center=None, n=2):
        return cls(SpectralField.from_function(func, band_limit, n),
                   np.zeros(3) if center is None else center)

    def graph_function(self, radius=None):
        radius = shrinker_radius(self.n) if radius is None else radius
        return self.profile - SpectralField.constant(radius, self.band_limit, self.n)

    def derivatives(self):
        return self.grid.synthesize_derivatives(self.profile.coeffs)

    def validate(self):
        d = self.derivatives()
        if not np.all(d[0] > 0):
            raise GraphError(f"profile not positive: min r = {d[0].min():.3e}")
        slope = nodal_geometry(d, self.grid, self.n)[2]
        if slope.max() >= self.slope_bound:
            raise GraphError(f"slope bound exceeded: max |grad r|/r = {slope.max():.3f}")

    def points(self):
        r = self.grid.synthesize(self.profile.coeffs)
        return self.center + r[:, None] * self.grid.directions

    def volume(self):
        n = self.n
        r = self.grid.synthesize(self.profile.coeffs)
        return float(self.grid.solid_weights @ r ** (n + 1)) / (n + 1)

    def volume_radius(self):
        """Radius of the ball with the same enclosed volume."""
        n = self.n
        unit_ball = math.pi ** ((n + 1) / 2) / math.gamma((n + 3) / 2)
        return (self.volume() / unit_ball) ** (1.0 / (n + 1))

    def centroid(self):
        """Centroid of the enclosed region."""
        n = self.n
        r = self.grid.synthesize(self.profile.coeffs)
        moment = (self.grid.solid_weights * r ** (n + 2)) @ self.grid.directions / (n + 2)
        return self.center + moment / self.volume()

    def inradius(self):
        """Smallest nodal distance from the ray origin to the surface."""
        return float(self.grid.synthesize(self.profile.coeffs).min())

    def scaled(self, factor):
        """Profile scaled by ``factor`` about the ray origin (center unchanged)."""
        return RadialGraph(self.profile * factor, self.center, self.slope_bound)

    def recentered(self, new_center):
        """Same surface re-expressed with rays from ``new_center``."""
        new_center = np.asarray(new_center, dtype=float)
        s = solve_rays(self, new_center, self.grid.directions)
        return RadialGraph(self.grid_field(s), new_center, self.slope_bound)

    def grid_field(self, values):
        return SpectralField(self.grid.analyze(values), self.n)


def mean_curvature_nodes(G):
    return nodal_geometry(G.derivatives(), G.grid, G.n)[0]


def mean_curvature(G):
    """Scalar mean curvature w.r.t. the outward normal (n/r on round spheres)."""
    return G.grid_field(mean_curvature_nodes(G))


def normals_nodes(G):
    d = G.derivatives()
    _, W, _, (gt, gp_s) = nodal_geometry(d, G.grid, G.n)
    grid = G.grid
    th = np.repeat(grid.theta, grid.nlon)
    ph = np.tile(grid.phi, grid.nlat)
    e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
    e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    grad = gt[:, None] * e_th + gp_s[:, None] * e_ph
    return (grid.directions - grad) / W[:, None]


def rescaled_speed_nodes(G):
    """phi = H - <x, nu>/2 at the nodes, together with W."""
    d = G.derivatives()
    H, W, _, _ = nodal_geometry(d, G.grid, G.n)
    support = d[0] / W
    if np.any(G.center):
        support = support + normals_nodes(G) @ G.center
    return H - 0.5 * support, W


def rescaled_speed(G):
    """Rescaled normal speed phi = H - <x, nu>/2; radial velocity is -W phi."""
    phi, _ = rescaled_speed_nodes(G)
    return G.grid_field(phi)


@dataclass(frozen=True)
class SimilarityAction:
    """Dilate by ``alpha`` about the origin, then translate by ``beta * U``."""

    alpha: float = 1.0
    beta: float = 0.0
    U: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        U = np.asarray(self.U, dtype=float)
        if self.beta > 0 and abs(np.linalg.norm(U) - 1) > 1e-12:
            raise ValueError("U must be a unit vector")
        object.__setattr__(self, "U", tuple(U))

    @classmethod
    def from_translation(cls, alpha, translation):
        t = np.asarray(translation, dtype=float)
        b = float(np.linalg.norm(t))
        return cls(alpha, b, tuple(t / b) if b > 0 else (1.0, 0.0, 0.0))

    @property
    def translation(self):
        return self.beta * np.asarray(self.U)

    def is_identity(self):
        return self.alpha == 1.0 and self.beta == 0.0

    def inverse(self):
        # x -> alpha x + t  inverts to  x -> x/alpha - t/alpha
        return SimilarityAction.from_translation(1.0 / self.alpha, -self.translation / self.alpha)

    def compose(self, first):
        """Action of applying ``first`` and then ``self``."""
        return SimilarityAction.from_translation(
            self.alpha * first.alpha, self.alpha * first.translation + self.translation
        )

    def apply_points(self, x):
        return self.alpha * np.asarray(x) + self.translation


def solve_rays(G, origin, directions, alpha=1.0, shift=None, tol=RAY_TOL, max_iter=60):
    """Distances ``s`` with ``origin + s*dir`` on the image ``alpha*G + shift``.

    Safeguarded Newton per ray; raises :class:`GraphError` when a ray does
    not hit the surface exactly once near the initial guess.
    """
    grid = G.grid
    coeffs = G.profile.coeffs
    shift = np.zeros(3) if shift is None else np.asarray(shift, dtype=float)
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(directions, dtype=float)
    base = (origin - shift) / alpha - G.center  # preimage of the ray origin, relative to center
    step = dirs / alpha
    # start from the image point along the same direction
    s = np.linalg.norm(alpha * (G.center + grid.evaluate(coeffs, dirs)[:, None] * dirs) + shift - origin, axis=1)
    scale = max(float(np.abs(s).max()), 1.0)
    for _ in range(max_iter):
        d = base + s[:, None] * step
        dn = np.linalg.norm(d, axis=1)
        dhat = d / dn[:, None]
        r, grad = grid.evaluate(coeffs, dhat, gradient=True)
        g = dn - r
        proj = np.einsum("ij,ij->i", dhat, step)
        tangential = step - proj[:, None] * dhat
        dg = proj - np.einsum("ij,ij->i", grad, tangential) / dn
        if np.any(dg <= 0):
            raise GraphError("ray is tangent to the surface; not a radial graph about this origin")
        delta = g / dg
        s_new = s - delta
        bad = s_new <= 0
        s_new[bad] = 0.5 * s[bad]
        s = s_new
        if np.max(np.abs(delta)) < tol * scale:
            break
    else:
        raise GraphError("ray solve did not converge")
    if np.any(s <= 0):
        raise GraphError("surface does not enclose the ray origin")
    return s


def apply_similarity(G, S):
    """Exact image of ``G`` under ``S``, resampled as a graph about the same center."""
    if S.is_identity():
        return G
    if S.beta == 0.0 and not np.any(G.center):
        return RadialGraph(G.profile * S.alpha, G.center, G.slope_bound)
    s = solve_rays(G, G.center, G.grid.directions, alpha=S.alpha, shift=S.translation)
    return RadialGraph(G.grid_field(s), G.center, G.slope_bound)


def _grad_vectors(field):
    """Unit-sphere gradient of a field as ambient vectors at the nodes."""
    grid = field.grid
    d = grid.synthesize_derivatives(field.coeffs)
    th = np.repeat(grid.theta, grid.nlon)
    ph = np.tile(grid.phi, grid.nlat)
    e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
    e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    return d[0], d[1][:, None] * e_th + (d[2] / grid.node_sin)[:, None] * e_ph


def first_order_similarity(u, S, radius=None):
    """Linear-in-(alpha - 1, beta) prediction of the transformed graph function.

    For a graph ``u`` over the sphere of radius ``R``::

        w = u + (R + u)(alpha - 1) + beta (<U, w> - <grad u, U> / (R + u))

    with the gradient on the unit sphere; ``R = 1`` is the unit-sphere form.
    """
    R = shrinker_radius(u.n) if radius is None else radius
    grid = u.grid
    vals, grad = _grad_vectors(u)
    U = np.asarray(S.U)
    w = (vals + (R + vals) * (S.alpha - 1.0)
         + S.beta * (grid.directions @ U - (grad @ U) / (R + vals)))
    return SpectralField(grid.analyze(w), u.n)


def transplant(f, g, radius=None, tol=1e-15, max_iter=100):
    """Graph function over the sphere of the surface ``{y + g(y) nu_1(y)}``.

    ``f`` is the graph function of Sigma_1 over the sphere and ``g`` a function
    on Sigma_1 given by its pull-back to the sphere (``g(w)`` lives at the
    point ``(R + f(w)) w``). Solved by fixed-point iteration on directions.
    """
    if f.coeffs.size != g.coeffs.size:
        raise ShapeMismatch("f and g must share a band limit")
    if g.is_zero():
        return f
    if f.is_zero():
        return g
    R = shrinker_radius(f.n) if radius is None else radius
    grid = f.grid
    target = grid.directions
    w = target.copy()
    for _ in range(max_iter):
        fv, fgrad = grid.evaluate(f.coeffs, w, gradient=True)
        gv = grid.evaluate(g.coeffs, w)
        r = R + fv
        nu = w - fgrad / r[:, None]
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        q = r[:, None] * w + gv[:, None] * nu
        qn = np.linalg.norm(q, axis=1)
        miss = target - q / qn[:, None]
        err = np.abs(miss).max()
        if err < tol:
            break
        w = w + miss
        w /= np.linalg.norm(w, axis=1, keepdims=True)
    else:
        if err > 1e-12:
            raise GraphError("transplanted surface is not a graph over the sphere")
    return SpectralField(grid.analyze(qn - R), f.n)


def rotate_graph(G, rotation):
    """Rotate a graph about its ray origin."""
    from .harmonics import rotate

    R = np.asarray(rotation, dtype=float)
    return RadialGraph(rotate(G.profile, R), R @ G.center, G.slope_bound)
