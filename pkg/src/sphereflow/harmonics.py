"""Real spherical harmonics on the shrinking sphere S^n(sqrt(2n)).

Functions on the sphere are stored as real coefficients ``c[k, m]`` against
a basis that is orthonormal in L^2 of the sphere of radius ``sqrt(2n)``.
The flat index of ``(k, m)`` is ``k*k + k + m`` with ``-k <= m <= k``; ``m > 0``
pairs with ``cos(m phi)`` and ``m < 0`` with ``sin(|m| phi)``.

Grids are Gauss-Legendre in ``cos(theta)`` times uniform in ``phi``, padded by
3/2 relative to the band limit (the 2/3 dealiasing rule), so that quadratic
products of band-limited fields project back onto the band without aliasing.

Only n = 2 transforms are implemented. :func:`eigenvalue` works for any n.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import sph_legendre_p_all

from .errors import ShapeMismatch, UnsupportedDimension

#: Q-norm mass constant; must exceed the top eigenvalue lambda_0 = 1.
LAMBDA_Q = 2.0

DEFAULT_BAND_LIMIT = 16


def shrinker_radius(n=2):
    return math.sqrt(2 * n)


def eigenvalue(k, n=2):
    """Eigenvalue of L = Delta + 1 on S^n(sqrt(2n)) for degree-k harmonics.

    Equal to ``1 - k(k+n-1)/(2n)``: 1 for constants, 1/2 for coordinate
    functions, -1/n for degree 2.
    """
    return 1.0 - k * (k + n - 1) / (2.0 * n)


def laplace_eigenvalue(k, n=2):
    """Eigenvalue of -Delta on S^n(sqrt(2n)) for degree k."""
    return k * (k + n - 1) / (2.0 * n)


def num_coeffs(band_limit):
    return (band_limit + 1) ** 2


def band_from_size(size):
    L = math.isqrt(size) - 1
    if (L + 1) ** 2 != size:
        raise ShapeMismatch(f"{size} coefficients is not a full band (need (L+1)^2)")
    return L


def flat_index(k, m):
    if abs(m) > k:
        raise ValueError(f"|m| must not exceed k (k={k}, m={m})")
    return k * k + k + m


@functools.lru_cache(maxsize=None)
def degree_vector(band_limit):
    """Degree k of every flat coefficient slot."""
    return np.repeat(np.arange(band_limit + 1), 2 * np.arange(band_limit + 1) + 1)


@functools.lru_cache(maxsize=None)
def order_vector(band_limit):
    return np.concatenate([np.arange(-k, k + 1) for k in range(band_limit + 1)])


def q_weights(band_limit, n=2, lam=LAMBDA_Q):
    return laplace_eigenvalue(degree_vector(band_limit), n) + lam


def _check_dim(n):
    if n != 2:
        raise UnsupportedDimension(f"spherical transforms are implemented for n = 2 only (got n = {n})")


class SphereGrid:
    """Gauss-Legendre x uniform-longitude grid with dense Legendre tables.

    Parameters
    ----------
    band_limit : int
        Largest harmonic degree kept in coefficient space.
    n : int
        Sphere dimension; only 2 is supported.
    """

    def __init__(self, band_limit=DEFAULT_BAND_LIMIT, n=2):
        _check_dim(n)
        L = int(band_limit)
        if L < 0:
            raise ValueError("band_limit must be non-negative")
        self.n = n
        self.band_limit = L
        self.radius = shrinker_radius(n)
        grid_degree = -(-3 * L // 2)
        self.nlat = grid_degree + 1
        self.nlon = 2 * grid_degree + 2
        x, w = np.polynomial.legendre.leggauss(self.nlat)
        self.x = x
        self.lat_weights = w
        self.theta = np.arccos(x)
        self.phi = 2 * np.pi * np.arange(self.nlon) / self.nlon
        self.sin_theta = np.sqrt(1 - x * x)
        self.cot_theta = x / self.sin_theta

        tt, pp = np.meshgrid(self.theta, self.phi, indexing="ij")
        st = np.sin(tt)
        self.directions = np.stack(
            [st * np.cos(pp), st * np.sin(pp), np.cos(tt)], axis=-1
        ).reshape(-1, 3)
        self.node_sin = np.repeat(self.sin_theta, self.nlon)
        self.node_cot = np.repeat(self.cot_theta, self.nlon)
        # solid-angle weights on the unit sphere
        self.solid_weights = np.repeat(w, self.nlon) * (2 * np.pi / self.nlon)
        self.area_weights = self.solid_weights * self.radius**2

        # p[d, l, m, j] -> tables[d, m, j, l]
        p = sph_legendre_p_all(L, L, self.theta, diff_n=2)[:, :, : L + 1, :]
        self._tables = np.ascontiguousarray(np.transpose(p, (0, 2, 3, 1)))
        scale = np.where(np.arange(L + 1) > 0, math.sqrt(2.0), 1.0)
        # analysis tables: (m, l, j) with quadrature weight and radius folded in
        self._analysis = np.ascontiguousarray(
            np.transpose(p[0], (1, 0, 2))
            * (w * 2 * np.pi / self.nlon)[None, None, :]
            * (self.radius * scale)[:, None, None]
        )
        self._scale = scale

        ks, ms = degree_vector(L), order_vector(L)
        flat = np.arange(num_coeffs(L))
        cos_sel = ms >= 0
        sin_sel = ms < 0
        self._cos_idx, self._cos_m, self._cos_l = flat[cos_sel], ms[cos_sel], ks[cos_sel]
        self._sin_idx, self._sin_m, self._sin_l = flat[sin_sel], -ms[sin_sel], ks[sin_sel]
        self._m = np.arange(L + 1, dtype=float)

    @property
    def num_nodes(self):
        return self.nlat * self.nlon

    @property
    def num_coeffs(self):
        return num_coeffs(self.band_limit)

    def __repr__(self):
        return f"SphereGrid(band_limit={self.band_limit}, nlat={self.nlat}, nlon={self.nlon})"

    # -- packing ----------------------------------------------------------

    def _pack(self, c):
        L = self.band_limit
        A = np.zeros((L + 1, L + 1) + c.shape[1:])
        S = np.zeros_like(A)
        A[self._cos_m, self._cos_l] = c[self._cos_idx]
        S[self._sin_m, self._sin_l] = c[self._sin_idx]
        factor = (self._scale / self.radius).reshape((L + 1, 1) + (1,) * (c.ndim - 1))
        return A * factor, S * factor

    def _unpack(self, A, S):
        out = np.empty((self.num_coeffs,) + A.shape[2:])
        out[self._cos_idx] = A[self._cos_m, self._cos_l]
        out[self._sin_idx] = S[self._sin_m, self._sin_l]
        return out

    def _to_nodes(self, a, b):
        # a, b: (..., m, j, B) latitude Fourier coefficients -> (..., nodes, B)
        lead = a.shape[:-3]
        B = a.shape[-1]
        nfreq = self.nlon // 2 + 1
        X = np.zeros(lead + (self.nlat, nfreq, B), dtype=complex)
        half = 0.5 * self.nlon
        X[..., :, 0, :] = self.nlon * a[..., 0, :, :]
        X[..., :, 1 : self.band_limit + 1, :] = np.swapaxes(
            half * (a[..., 1:, :, :] - 1j * b[..., 1:, :, :]), -3, -2
        )
        vals = np.fft.irfft(X, n=self.nlon, axis=-2)
        return vals.reshape(lead + (self.num_nodes, B))

    def _as_batch(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape[0] != self.num_coeffs:
            raise ShapeMismatch(
                f"expected {self.num_coeffs} coefficients for band limit {self.band_limit}, got {c.shape[0]}"
            )
        return (c[:, None], True) if c.ndim == 1 else (c, False)

    # -- transforms -------------------------------------------------------

    def synthesize(self, coeffs):
        """Nodal values of a coefficient vector (or batch ``(ncoef, B)``)."""
        c, squeeze = self._as_batch(coeffs)
        A, S = self._pack(c)
        P = self._tables[0]
        vals = self._to_nodes(P @ A, P @ S)
        return vals[:, 0] if squeeze else vals

    def analyze(self, values):
        """Project nodal values onto the band; inverse of :meth:`synthesize`."""
        v = np.asarray(values, dtype=float)
        if v.shape[0] != self.num_nodes:
            raise ShapeMismatch(f"expected {self.num_nodes} nodal values, got {v.shape[0]}")
        squeeze = v.ndim == 1
        if squeeze:
            v = v[:, None]
        F = np.fft.rfft(v.reshape(self.nlat, self.nlon, -1), axis=1)[:, : self.band_limit + 1]
        F = np.swapaxes(F, 0, 1)  # (m, j, B)
        A = self._analysis @ F.real
        S = self._analysis @ (-F.imag)
        out = self._unpack(A, S)
        return out[:, 0] if squeeze else out

    def synthesize_derivatives(self, coeffs):
        """Values and unit-sphere angular derivatives at the nodes.

        Returns an array of shape ``(6, nodes[, B])`` ordered as
        ``f, f_theta, f_phi, f_theta_theta, f_theta_phi, f_phi_phi``.
        """
        c, squeeze = self._as_batch(coeffs)
        A, S = self._pack(c)
        T = self._tables
        a0, b0 = T[0] @ A, T[0] @ S
        a1, b1 = T[1] @ A, T[1] @ S
        a2, b2 = T[2] @ A, T[2] @ S
        m = self._m.reshape(-1, 1, 1)
        a = np.stack([a0, a1, m * b0, a2, m * b1, -m * m * a0])
        b = np.stack([b0, b1, -m * a0, b2, -m * a1, -m * m * b0])
        vals = self._to_nodes(a, b)
        return vals[..., 0] if squeeze else vals

    def evaluate(self, coeffs, directions, gradient=False):
        """Evaluate at arbitrary unit directions ``(npts, 3)``.

        With ``gradient=True`` also returns the unit-sphere gradient as
        ambient 3-vectors, shape ``(npts, 3[, B])``.
        """
        c, squeeze = self._as_batch(coeffs)
        basis, grad_basis = self.basis_at(directions, gradient=gradient)
        vals = basis @ c
        if not gradient:
            return vals[:, 0] if squeeze else vals
        grads = np.einsum("pdi,ib->pdb", grad_basis, c)
        if squeeze:
            return vals[:, 0], grads[..., 0]
        return vals, grads

    def basis_at(self, directions, gradient=False):
        """Basis matrix ``(npts, ncoef)`` at directions (and gradient basis)."""
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        L = self.band_limit
        theta = np.arccos(np.clip(d[:, 2], -1.0, 1.0))
        phi = np.arctan2(d[:, 1], d[:, 0])
        p = sph_legendre_p_all(L, L, theta, diff_n=1 if gradient else 0)
        ks, ms = degree_vector(L), order_vector(L)
        am = np.abs(ms)
        scale = np.where(am > 0, math.sqrt(2.0), 1.0) / self.radius
        trig = np.where(ms[:, None] >= 0, np.cos(am[:, None] * phi), np.sin(am[:, None] * phi))
        P = p[0][ks, am]  # (ncoef, npts)
        basis = (scale[:, None] * P * trig).T
        if not gradient:
            return basis, None
        dtrig = np.where(ms[:, None] >= 0, -am[:, None] * np.sin(am[:, None] * phi),
                         am[:, None] * np.cos(am[:, None] * phi))
        d_theta = (scale[:, None] * p[1][ks, am] * trig).T
        st = np.maximum(np.sin(theta), 1e-150)
        d_phi_over_sin = (scale[:, None] * P * dtrig).T / st[:, None]
        ct, cp, sp = np.cos(theta), np.cos(phi), np.sin(phi)
        e_theta = np.stack([ct * cp, ct * sp, -np.sin(theta)], axis=1)
        e_phi = np.stack([-sp, cp, np.zeros_like(cp)], axis=1)
        grad = e_theta[:, :, None] * d_theta[:, None, :] + e_phi[:, :, None] * d_phi_over_sin[:, None, :]
        return basis, grad

    def integrate(self, values):
        """Integral over S^n(sqrt(2n)) of nodal values."""
        return self.area_weights @ np.asarray(values)


@functools.lru_cache(maxsize=16)
def sphere_grid(band_limit=DEFAULT_BAND_LIMIT, n=2):
    """Cached :class:`SphereGrid`; grids are immutable and safely shared."""
    return SphereGrid(band_limit, n)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A band-limited function on the sphere, stored by its coefficients."""

    coeffs: np.ndarray
    n: int = 2

    def __post_init__(self):
        _check_dim(self.n)
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise ShapeMismatch("coefficients must be a flat vector")
        band_from_size(c.size)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def band_limit(self):
        return band_from_size(self.coeffs.size)

    @property
    def grid(self):
        return sphere_grid(self.band_limit, self.n)

    @classmethod
    def zeros(cls, band_limit=DEFAULT_BAND_LIMIT, n=2):
        return cls(np.zeros(num_coeffs(band_limit)), n)

    @classmethod
    def constant(cls, value, band_limit=DEFAULT_BAND_LIMIT, n=2):
        c = np.zeros(num_coeffs(band_limit))
        c[0] = value * math.sqrt(4 * math.pi) * shrinker_radius(n)
        return cls(c, n)

    @classmethod
    def harmonic(cls, k, m=0, band_limit=DEFAULT_BAND_LIMIT, amplitude=1.0, n=2):
        """``amplitude`` times the unit-L^2 real harmonic of degree k, order m."""
        if k > band_limit:
            raise ValueError(f"degree {k} exceeds band limit {band_limit}")
        c = np.zeros(num_coeffs(band_limit))
        c[flat_index(k, m)] = amplitude
        return cls(c, n)

    @classmethod
    def from_values(cls, values, band_limit=DEFAULT_BAND_LIMIT, n=2):
        return analyze(values, sphere_grid(band_limit, n))

    @classmethod
    def from_function(cls, func, band_limit=DEFAULT_BAND_LIMIT, n=2):
        """Analyze ``func(directions) -> values`` sampled at the grid nodes."""
        grid = sphere_grid(band_limit, n)
        return analyze(func(grid.directions), grid)

    def values(self):
        return self.grid.synthesize(self.coeffs)

    def at(self, directions):
        return self.grid.evaluate(self.coeffs, directions)

    def degree_part(self, k):
        c = np.where(degree_vector(self.band_limit) == k, self.coeffs, 0.0)
        return SpectralField(c, self.n)

    def degree_norms(self):
        """L^2 norm of each degree component."""
        ks = degree_vector(self.band_limit)
        return np.sqrt(np.bincount(ks, weights=self.coeffs**2, minlength=self.band_limit + 1))

    def resize(self, band_limit):
        c = np.zeros(num_coeffs(band_limit))
        m = min(c.size, self.coeffs.size)
        c[:m] = self.coeffs[:m]
        return SpectralField(c, self.n)

    def is_zero(self):
        return not np.any(self.coeffs)

    def _other(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.coeffs.size != self.coeffs.size or other.n != self.n:
            raise ShapeMismatch("fields have different band limits or dimensions")
        return other.coeffs

    def __add__(self, other):
        c = self._other(other)
        return c if c is NotImplemented else SpectralField(self.coeffs + c, self.n)

    def __sub__(self, other):
        c = self._other(other)
        return c if c is NotImplemented else SpectralField(self.coeffs - c, self.n)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar), self.n)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.coeffs / float(scalar), self.n)

    def __neg__(self):
        return SpectralField(-self.coeffs, self.n)

    def __repr__(self):
        return f"SpectralField(band_limit={self.band_limit}, n={self.n}, l2={l2_norm(self):.3e})"


@dataclass(frozen=True)
class ModeSplit:
    plus: SpectralField
    two: SpectralField
    minus: SpectralField
    q_norms: tuple

    @property
    def fractions(self):
        """Q-norm fraction of each part relative to the whole."""
        total = math.sqrt(sum(q * q for q in self.q_norms))
        if total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(q / total for q in self.q_norms)


def analyze(values, grid):
    return SpectralField(grid.analyze(values), grid.n)


def synthesize(field, grid):
    if field.band_limit != grid.band_limit or field.n != grid.n:
        raise ShapeMismatch("field band limit does not match grid")
    return grid.synthesize(field.coeffs)


def _pair(f, g):
    if f.coeffs.size != g.coeffs.size or f.n != g.n:
        raise ShapeMismatch("fields have different band limits or dimensions")


def l2_inner(f, g):
    _pair(f, g)
    return float(f.coeffs @ g.coeffs)


def l2_norm(f):
    return float(np.linalg.norm(f.coeffs))


def q_inner(f, g, lam=LAMBDA_Q):
    """Q inner product: integral of grad f . grad g + lam f g."""
    _pair(f, g)
    return float(np.sum(q_weights(f.band_limit, f.n, lam) * f.coeffs * g.coeffs))


def q_norm(f, lam=LAMBDA_Q):
    return math.sqrt(max(q_inner(f, f, lam), 0.0))


def q_norm_coeffs(c, n=2, lam=LAMBDA_Q):
    """Q-norm of raw coefficient arrays along axis 0."""
    c = np.asarray(c)
    w = q_weights(band_from_size(c.shape[0]), n, lam)
    return np.sqrt(np.einsum("i,i...->...", w, c * c))


_PARTS = {"plus": (0, 1), "two": (2, 2), "minus": (3, None)}


def projection_mask(part, band_limit):
    lo, hi = _PARTS[part]
    k = degree_vector(band_limit)
    return (k >= lo) & (k <= (band_limit if hi is None else hi))


def _project(f, part):
    return SpectralField(np.where(projection_mask(part, f.band_limit), f.coeffs, 0.0), f.n)


def pi_plus(f):
    """Projection onto degrees 0 and 1 (dilation and translation modes)."""
    return _project(f, "plus")


def pi_two(f):
    return _project(f, "two")


def pi_minus(f):
    return _project(f, "minus")


def mode_split(f, lam=LAMBDA_Q):
    parts = (pi_plus(f), pi_two(f), pi_minus(f))
    return ModeSplit(*parts, q_norms=tuple(q_norm(p, lam) for p in parts))


def heat_semigroup(f, t):
    """Apply exp(t L): each degree-k coefficient scales by exp(t lambda_k)."""
    k = degree_vector(f.band_limit)
    return SpectralField(f.coeffs * np.exp(t * eigenvalue(k, f.n)), f.n)


def rotate(f, rotation):
    """Return ``g(w) = f(R^T w)``, i.e. the field carried along by ``R``."""
    grid = f.grid
    R = np.asarray(rotation, dtype=float)
    pulled = grid.directions @ R  # rows are R^T w
    return SpectralField(grid.analyze(grid.evaluate(f.coeffs, pulled)), f.n)


def gradient_sq(field):
    """|grad f|^2 at the nodes, gradient taken on S^n(sqrt(2n))."""
    grid = field.grid
    d = grid.synthesize_derivatives(field.coeffs)
    return (d[1] ** 2 + (d[2] / grid.node_sin) ** 2) / grid.radius**2


def h1_norm(field):
    """H^1 norm by quadrature (independent of the spectral Q weights)."""
    grid = field.grid
    v = grid.synthesize(field.coeffs)
    return math.sqrt(grid.integrate(gradient_sq(field) + v * v))


def c2_surrogate(field):
    """Discrete C^2 size: max over nodes of |u|, |grad u| and |Hess u|.

    Stands in for a C^{2,alpha} norm; the Holder seminorm is dropped.
    Derivatives are taken on S^n(sqrt(2n)).
    """
    grid = field.grid
    f, ft, fp, ftt, ftp, fpp = grid.synthesize_derivatives(field.coeffs)
    s, cot, R = grid.node_sin, grid.node_cot, grid.radius
    grad = np.sqrt(ft**2 + (fp / s) ** 2) / R
    h11 = ftt
    h12 = (ftp - cot * fp) / s
    h22 = (fpp + s * s * cot * ft) / (s * s)
    hess = np.sqrt(h11**2 + 2 * h12**2 + h22**2) / R**2
    return float(max(np.abs(f).max(), grad.max(), hess.max()))


def write_coefficients_csv(field, path, lam=LAMBDA_Q):
    """Dump ``(k, m, c)`` rows with a commented header describing the basis."""
    k, m = degree_vector(field.band_limit), order_vector(field.band_limit)
    header = (
        f"# n={field.n} k_max={field.band_limit} Lambda={lam} "
        f"normalization=orthonormal-L2(S^{field.n}(sqrt({2 * field.n})))\n"
    )
    with open(path, "w") as fh:
        fh.write(header)
        fh.write("k,m,c\n")
        for ki, mi, ci in zip(k, m, field.coeffs):
            fh.write(f"{ki},{mi},{ci:.17g}\n")


def read_coefficients_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    meta[key] = val
                continue
            if line.startswith("k,"):
                continue
            k, m, c = line.split(",")
            rows.append((int(k), int(m), float(c)))
    L = int(meta.get("k_max", max(r[0] for r in rows)))
    coeffs = np.zeros(num_coeffs(L))
    for k, m, c in rows:
        coeffs[flat_index(k, m)] = c
    return SpectralField(coeffs, int(meta.get("n", 2)))


def tetrahedral_rotations():
    """The 12 rotations of the tetrahedral group (cyclic axis permutations
    combined with sign changes of two coordinates)."""
    perms = [np.eye(3), np.eye(3)[[1, 2, 0]], np.eye(3)[[2, 0, 1]]]
    signs = [np.diag(s) for s in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))]
    return [S @ P for P in perms for S in signs]


@functools.lru_cache(maxsize=8)
def _symmetry_projector(name, band_limit, n):
    if name != "tetrahedral":
        raise ValueError(f"unknown symmetry group {name!r}")
    grid = sphere_grid(band_limit, n)
    P = np.zeros((grid.num_coeffs, grid.num_coeffs))
    rots = tetrahedral_rotations()
    for R in rots:
        B = grid.basis_at(grid.directions @ R)[0]  # values of f(R^T w) for each basis f
        P += grid.analyze(B)
    P /= len(rots)
    P.setflags(write=False)
    return P


def symmetry_projector(name, band_limit, n=2):
    """Coefficient matrix averaging a field over a rotation group.

    Applied after every time step it removes round-off leakage out of the
    symmetry class; xyz (a degree-3 harmonic) is tetrahedrally invariant
    while no degree-1 or degree-2 harmonic is.
    """
    return _symmetry_projector(name, band_limit, n)
