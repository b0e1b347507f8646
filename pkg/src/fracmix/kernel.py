"""Singular kernel, pointwise operators, and closed-form weight integrals.

All 1D integrals of |x-y|^{-1-2s} against piecewise polynomials reduce to
power moments with known antiderivatives; the helpers here evaluate them
exactly (including the logarithmic branch that appears when an exponent
hits -1, e.g. at s = 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma as _gamma

from .domain import DomainPartition, Mesh, OMEGA
from .errors import DomainError, SingularityError

Array = np.ndarray


def normalization_constant(s: float, N: int = 1) -> float:
    """Constant multiplying the jump kernel in the Fourier-symbol convention.

    Equals 2^{2s} s Gamma((N+2s)/2) / (pi^{N/2} Gamma(1-s)); for s=1/2,
    N=1 this is 1/pi.
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"order must lie in (0,1), got s={s}")
    return (2.0 ** (2 * s) * s * _gamma((N + 2 * s) / 2.0)
            / (np.pi ** (N / 2.0) * _gamma(1.0 - s)))


@dataclass(frozen=True)
class KernelParams:
    """Fractional order plus the cached normalization constant."""

    s: float
    dim: int = 1
    a_ns: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "a_ns", normalization_constant(self.s, self.dim))


def kernel_eval(k: KernelParams, x, y):
    """a_{N,s} |x-y|^{-(N+2s)}; symmetric and positive away from the diagonal."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if np.any(d == 0.0):
        raise SingularityError("kernel evaluated at x == y")
    return k.a_ns * d ** (-(k.dim + 2 * k.s))


# ---------------------------------------------------------------------------
# power moments
# ---------------------------------------------------------------------------

def pow_int(d0, d1, p: float):
    """Integral of r^p dr from d0 to d1 (elementwise); log branch at p=-1."""
    d0 = np.asarray(d0, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    if abs(p + 1.0) < 1e-14:
        return np.log(d1 / d0)
    q = p + 1.0
    # d^q with d possibly 0 and q>0, or +inf and q<0: both give 0 contribution
    def _pw(d):
        with np.errstate(divide="ignore"):
            out = np.where(np.isinf(d), 0.0 if q < 0 else np.inf, d ** q)
        return out
    return (_pw(d1) - _pw(d0)) / q


def region_weight(x, lo: float, hi: float, s: float):
    """Integral of |x-y|^{-1-2s} dy over (lo,hi), for x outside (lo,hi).

    Either endpoint of the region may be infinite.
    """
    x = np.asarray(x, dtype=float)
    left = x <= lo   # region to the right of x
    d_near = np.where(left, lo - x, x - hi)
    d_far = np.where(left, hi - x, x - lo)
    return _inv_pow_diff(d_near, d_far, s)


def _inv_pow_diff(d_near, d_far, s: float):
    """(d_near^{-2s} - d_far^{-2s}) / (2s) with inf -> 0 handling."""
    d_near = np.asarray(d_near, dtype=float)
    d_far = np.asarray(d_far, dtype=float)
    with np.errstate(divide="ignore"):
        a = np.where(np.isinf(d_near), 0.0, d_near ** (-2 * s))
        b = np.where(np.isinf(d_far), 0.0, d_far ** (-2 * s))
    return (a - b) / (2 * s)


def first_moment(x, lo: float, hi: float, s: float):
    """Integral of (x-y)|x-y|^{-1-2s} dy over bounded (lo,hi), x outside."""
    x = np.asarray(x, dtype=float)
    left = x <= lo
    d_near = np.where(left, lo - x, x - hi)
    d_far = np.where(left, hi - x, x - lo)
    mag = pow_int(d_near, d_far, -2 * s)
    return np.where(left, -mag, mag)


def sigma1_weight(p: DomainPartition, x):
    """kappa(x) = integral of |x-y|^{-1-2s} over all of sigma1 (no a_ns)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for iv in p.sigma1:
        total += region_weight(x, iv.lo, iv.hi, p.s)
    return total


def reflect_normalizer(p: DomainPartition, x: float) -> float:
    """c(x) with c(x) * integral_omega |x-y|^{-1-2s} dy = 1, for x in sigma2.

    Uses the bare kernel (no a_ns): jump probabilities are ratios, so the
    chain built from it is unaffected by the convention.
    """
    if not p.in_closure_sigma2(x) or p.in_closure_omega(x):
        raise DomainError(f"x={x} is not in sigma2")
    mass = sum(float(region_weight(x, iv.lo, iv.hi, p.s)) for iv in p.omega)
    return 1.0 / mass


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    """Piecewise-linear function on the mesh, extended by a datum outside.

    ``node_values`` covers every mesh node (eliminated nodes normally hold
    the Dirichlet datum, zero by default).  Outside the meshed box the
    field equals ``exterior_const`` unless a callable ``exterior_fn`` is
    supplied; closed-form tail integrals always use the constant.
    """

    mesh: Mesh
    node_values: Array
    exterior_const: float = 0.0
    exterior_fn: Callable[[Array], Array] | None = None

    def __post_init__(self):
        vals = np.asarray(self.node_values, dtype=float)
        if vals.shape != self.mesh.nodes.shape:
            raise ValueError("node_values must match mesh nodes")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "node_values", vals)

    @classmethod
    def from_active(cls, mesh: Mesh, active_values: Array,
                    boundary_values: Array | None = None,
                    exterior_const: float = 0.0, exterior_fn=None) -> "Field":
        vals = np.zeros(len(mesh.nodes))
        vals[mesh.active] = np.asarray(active_values, dtype=float)
        if boundary_values is not None:
            elim = np.flatnonzero(mesh.active_map < 0)
            vals[elim] = boundary_values
        return cls(mesh, vals, exterior_const, exterior_fn)

    @classmethod
    def interpolate(cls, mesh: Mesh, fn: Callable[[Array], Array],
                    exterior_const: float = 0.0, exterior_fn=None) -> "Field":
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=float),
                   exterior_const, exterior_fn)

    @property
    def active_values(self) -> Array:
        return self.node_values[self.mesh.active]

    def _in_box(self, x: Array) -> Array:
        p = self.mesh.partition
        inside = np.zeros(x.shape, dtype=bool)
        for iv in list(p.omega) + list(p.sigma2):
            inside |= (x >= iv.lo) & (x <= iv.hi)
        return inside

    def __call__(self, x):
        scalar = np.isscalar(x) or np.asarray(x).ndim == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.interp(x, self.mesh.nodes, self.node_values)
        inside = self._in_box(x)
        if self.exterior_fn is None:
            out[~inside] = self.exterior_const
        else:
            out[~inside] = np.asarray(self.exterior_fn(x[~inside]), dtype=float)
        return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# pointwise operators
# ---------------------------------------------------------------------------

def _element_lines(u: Field):
    """Per-element line coefficients (alpha + beta * x) of the field."""
    mesh = u.mesh
    p = mesh.nodes[mesh.elements[:, 0]]
    q = mesh.nodes[mesh.elements[:, 1]]
    up = u.node_values[mesh.elements[:, 0]]
    uq = u.node_values[mesh.elements[:, 1]]
    beta = (uq - up) / (q - p)
    alpha = up - beta * p
    return p, q, alpha, beta


def _far_field_sum(u: Field, x: Array, include: Array) -> Array:
    """Exact elementwise integrals of (u(x)-u(y)) |x-y|^{-1-2s} dy (no a_ns).

    ``include`` (n_x, n_el) marks element/point combinations to integrate;
    every included element must not contain the evaluation point.
    """
    mesh = u.mesh
    s = mesh.partition.s
    p, q, alpha, beta = _element_lines(u)
    ux = np.atleast_1d(np.asarray(u(x), dtype=float))
    X = x[:, None]
    left = X <= p[None, :]
    d_near = np.where(left, p[None, :] - X, X - q[None, :])
    d_far = np.where(left, q[None, :] - X, X - p[None, :])
    d_near = np.where(include, d_near, 1.0)
    d_far = np.where(include, d_far, 2.0)
    W0 = _inv_pow_diff(d_near, d_far, s)
    W1mag = pow_int(d_near, d_far, -2 * s)
    W1 = np.where(left, -W1mag, W1mag)
    A = ux[:, None] - (alpha[None, :] + beta[None, :] * X)
    contrib = np.where(include, A * W0 + beta[None, :] * W1, 0.0)
    return contrib.sum(axis=1)


def pv_fractional_laplacian(u: Field, x, quad=None):
    """Principal-value fractional Laplacian of a mesh field at points x.

    Split per evaluation point: a symmetric window inside the containing
    element (where the field is linear, so the second difference cancels
    exactly), the remaining one-sided sliver of that element, exact
    elementwise integrals over the rest of the mesh, and closed-form tails
    over sigma1 where the field equals the zero datum.  Exact up to
    roundoff for piecewise-linear fields; ``quad`` is accepted for
    interface compatibility and unused.
    """
    mesh = u.mesh
    part = mesh.partition
    s = part.s
    a = normalization_constant(s, part.dim)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0

    p_el = mesh.nodes[mesh.elements[:, 0]]
    q_el = mesh.nodes[mesh.elements[:, 1]]
    contains = (x_arr[:, None] > p_el[None, :]) & (x_arr[:, None] < q_el[None, :])
    omega_el = mesh.el_region == OMEGA
    ok = (contains & omega_el[None, :]).any(axis=1)
    if not np.all(ok):
        bad = x_arr[~ok][0]
        raise DomainError(f"x={bad} is not strictly inside an omega element")

    total = _far_field_sum(u, x_arr, include=~contains)

    # one-sided sliver of the containing element
    el_idx = np.argmax(contains, axis=1)
    p0, q0 = p_el[el_idx], q_el[el_idx]
    up = u.node_values[mesh.elements[el_idx, 0]]
    uq = u.node_values[mesh.elements[el_idx, 1]]
    beta0 = (uq - up) / (q0 - p0)
    dl = x_arr - p0
    dr = q0 - x_arr
    delta = np.minimum(dl, dr)
    right_left = dl > dr  # leftover on the left side
    lever = np.where(right_left, pow_int(delta, dl, -2 * s),
                     -pow_int(delta, dr, -2 * s))
    lever = np.where(np.isclose(dl, dr), 0.0, lever)
    total += beta0 * lever

    # tails over sigma1, where the field sits at its exterior datum
    ux = np.atleast_1d(np.asarray(u(x_arr), dtype=float))
    total += (ux - u.exterior_const) * sigma1_weight(part, x_arr)

    out = a * total
    return float(out[0]) if scalar else out


def pv_of_profile(part: DomainPartition, fn, x, n_radial: int = 24,
                  levels: int = 30, ratio: float = 0.3, order: int = 10):
    """Principal-value operator applied to a smooth profile vanishing off omega.

    Near field: symmetric pairing of +-t contributions turns the odd
    singularity into a second difference, integrated with a Gauss-Jacobi
    rule in the radius (spectrally accurate for smooth profiles).  Far
    field: composite Gauss panels geometrically graded toward the omega
    endpoints, where profiles of interest are only Holder continuous.
    Tails contribute fn(x) times a closed-form kernel mass.
    """
    from scipy.special import roots_jacobi, roots_legendre
    s = part.s
    a = normalization_constant(s, part.dim)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0

    tj, wj = roots_jacobi(n_radial, 0.0, 1.0 - 2 * s)
    xg, wg = roots_legendre(order)

    def graded_panels(lo, hi, toward_lo, toward_hi):
        breaks = [0.0, 1.0]
        acc = 1.0
        for _ in range(levels):
            acc *= ratio
            if toward_lo:
                breaks.append(acc)
            if toward_hi:
                breaks.append(1.0 - acc)
        pts = lo + (hi - lo) * np.unique(np.clip(breaks, 0.0, 1.0))
        mid = 0.5 * (pts[:-1] + pts[1:])
        half = 0.5 * (pts[1:] - pts[:-1])
        ys = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        ws = (half[:, None] * wg[None, :]).ravel()
        return ys, ws

    out = np.empty(len(x_arr))
    for i, xi in enumerate(x_arr):
        home = None
        for iv in part.omega:
            if iv.lo < xi < iv.hi:
                home = iv
                break
        if home is None:
            raise DomainError(f"x={xi} is not strictly inside omega")
        uxi = float(fn(np.array([xi]))[0])
        r = 0.5 * min(xi - home.lo, home.hi - xi)
        # near field: int_0^r t^{1-2s} g(t) dt, g = second difference / t^2
        t = r * (1 + tj) / 2.0
        g = (2 * uxi - fn(xi + t) - fn(xi - t)) / t ** 2
        total = (r / 2.0) ** (2 - 2 * s) * float(np.sum(wj * g))
        # remaining parts of the home component
        for (lo, hi, t_lo, t_hi) in ((home.lo, xi - r, True, False),
                                     (xi + r, home.hi, False, True)):
            ys, ws = graded_panels(lo, hi, t_lo, t_hi)
            total += float(np.sum(ws * (uxi - fn(ys)) * np.abs(xi - ys) ** (-1 - 2 * s)))
        # other omega components
        for iv in part.omega:
            if iv is home:
                continue
            ys, ws = graded_panels(iv.lo, iv.hi, True, True)
            total += float(np.sum(ws * (uxi - fn(ys)) * np.abs(xi - ys) ** (-1 - 2 * s)))
        # everything outside omega carries the zero datum
        tail = sigma1_weight(part, np.array([xi]))[0]
        for iv in part.sigma2:
            tail += region_weight(np.array([xi]), iv.lo, iv.hi, s)[0]
        total += uxi * tail
        out[i] = a * total
    return float(out[0]) if scalar else out


def neumann_derivative(u: Field, x):
    """Nonlocal flux a_{N,s} * integral over omega of (u(x)-u(y)) kernel dy.

    Defined for x outside the closure of omega; the integrand is proper
    there and the elementwise integrals are exact.
    """
    mesh = u.mesh
    part = mesh.partition
    a = normalization_constant(part.s, part.dim)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0
    for xi in x_arr:
        if part.in_closure_omega(float(xi), tol=0.0):
            raise DomainError(f"x={xi} lies in the closure of omega")

    omega_el = mesh.el_region == OMEGA
    include = np.broadcast_to(omega_el[None, :], (len(x_arr), len(omega_el)))
    out = a * _far_field_sum(u, x_arr, include=include)
    return float(out[0]) if scalar else out
