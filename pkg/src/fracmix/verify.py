"""Numerical certificates for the maximum-principle inequalities.

Each certificate measures the constants of one inequality on a mesh sweep
and passes when the inequality holds with its stated slack and the
measured constant is stable between the two finest meshes.  Certificates
are pure functions of their inputs and seeds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .assembly import OperatorSet, assemble_load, weighted_pair_form, _gl
from .domain import Mesh, OMEGA
from .errors import DomainError, QuadratureError, RatioError
from .kernel import Field, neumann_derivative, pv_fractional_laplacian
from .solve import (DIRICHLET, IMPLICIT_EULER, MIXED, EigenPair, Trajectory,
                    solve_eigen, solve_elliptic, solve_parabolic, solve_xi0)

Array = np.ndarray


@dataclass(frozen=True)
class Certificate:
    """Measured constants and verdict for one inequality."""

    name: str
    constants: dict
    tolerance: float
    passed: bool
    inputs_digest: str
    notes: str = ""

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "constants": {k: (float(v) if np.isscalar(v) or isinstance(v, (int, float))
                              else list(np.asarray(v, dtype=float)))
                          for k, v in self.constants.items()},
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "inputs": self.inputs_digest,
            "notes": self.notes,
        }


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
    return h.hexdigest()[:16]


def _sweep_digest(sweep, *extra) -> str:
    return _digest([ops.meta.get("mesh") for ops in sweep],
                   sweep[-1].kernel.s, *extra)


def _drift(values) -> float:
    """Relative change of a measured constant between the two finest meshes."""
    if len(values) < 2:
        return 0.0
    a, b = values[-2], values[-1]
    return abs(b - a) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# function families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionFamily:
    """Seeded family of nonnegative source/initial profiles on omega.

    ``kind`` is one of "bumps", "indicators", "constant", "eigenfunction".
    ``floor`` lifts every member by a constant on omega (used for ratio
    monitors that need data bounded away from zero); compactly supported
    families keep it at 0.
    """

    kind: str = "bumps"
    count: int = 10
    seed: int = 2024
    floor: float = 0.0

    def describe(self) -> tuple:
        return (self.kind, self.count, self.seed, self.floor)


def _smooth_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _omega_mask(part, y):
    m = np.zeros(np.shape(y), dtype=bool)
    for iv in part.omega:
        m |= (y > iv.lo) & (y < iv.hi)
    return m


def family_functions(fam: FunctionFamily, part) -> list:
    """Vectorized callables, each nonnegative and vanishing outside omega."""
    rng = np.random.default_rng(fam.seed)
    comps = list(part.omega)
    out = []
    for _ in range(fam.count):
        if fam.kind == "constant":
            def f(y, _part=part):
                y = np.asarray(y, dtype=float)
                return np.where(_omega_mask(_part, y), 1.0, 0.0)
            out.append(f)
            continue
        iv = comps[rng.integers(0, len(comps))]
        L = iv.measure
        if fam.kind == "bumps":
            k = int(rng.integers(1, 4))
            cs = rng.uniform(iv.lo + 0.15 * L, iv.hi - 0.15 * L, size=k)
            ws = rng.uniform(0.08 * L, 0.3 * L, size=k)
            ws = np.minimum(ws, np.minimum(cs - iv.lo, iv.hi - cs) * 0.95)
            amps = rng.uniform(0.3, 1.0, size=k)
        elif fam.kind == "indicators":
            a = rng.uniform(iv.lo + 0.1 * L, iv.hi - 0.4 * L)
            b = rng.uniform(a + 0.2 * L, iv.hi - 0.05 * L)
            cs = np.array([0.5 * (a + b)])
            ws = np.array([0.5 * (b - a)])
            amps = np.array([1.0])
        else:
            raise DomainError(f"unknown family kind {fam.kind!r}")

        def f(y, cs=cs, ws=ws, amps=amps, _part=part, floor=fam.floor):
            y = np.asarray(y, dtype=float)
            val = np.zeros_like(y)
            for c, w, a in zip(cs, ws, amps):
                val += a * _smooth_bump((y - c) / w)
            val += floor
            return np.where(_omega_mask(_part, y), val, 0.0)
        out.append(f)
    return out


# ---------------------------------------------------------------------------
# quadrature helpers on omega
# ---------------------------------------------------------------------------

def _omega_gauss(mesh: Mesh, order: int = 12):
    xg, wg = _gl(order)
    sel = mesh.el_region == OMEGA
    p = mesh.nodes[mesh.elements[sel, 0]]
    q = mesh.nodes[mesh.elements[sel, 1]]
    X = 0.5 * (p + q)[:, None] + 0.5 * (q - p)[:, None] * xg[None, :]
    W = 0.5 * (q - p)[:, None] * wg[None, :]
    return X.ravel(), W.ravel()


def _integral_omega(mesh: Mesh, fn, order: int = 12) -> float:
    X, W = _omega_gauss(mesh, order)
    return float(np.sum(np.asarray(fn(X), dtype=float) * W))


def _delta(mesh: Mesh, x):
    endpoints = mesh.partition.omega_endpoints
    return np.min(np.abs(np.asarray(x, dtype=float)[:, None] - endpoints[None, :]), axis=1)


def _lumped_omega(mesh: Mesh) -> Array:
    """Nodal integration weights over omega (mass row sums, active DoFs)."""
    from .assembly import assemble_mass
    return assemble_mass(mesh, "omega").sum(axis=1)


def _interp_active(mesh: Mesh, fn) -> Array:
    """Active-DoF interpolant of a function (eliminated nodes pinned to 0)."""
    return np.asarray(fn(mesh.nodes), dtype=float)[mesh.active]


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def certify_poincare(sweep: list[OperatorSet], samples: FunctionFamily,
                     drift_tol: float = 0.10, slack: float = 1e-10) -> Certificate:
    """First eigenvalue positive; every sample obeys the L2-vs-energy bound."""
    lams = []
    eig = None
    for ops in sweep:
        eig = solve_eigen(MIXED, ops)
        lams.append(eig.lambda1)
    ops = sweep[-1]
    fs = family_functions(samples, ops.mesh.partition)
    ok = lams[-1] > 0
    worst = np.inf
    for f in fs:
        phi = _interp_active(ops.mesh, f)
        num = phi @ (ops.A @ phi)
        den = phi @ (ops.M_omega @ phi)
        if den <= 0:
            continue
        margin = num / den - lams[-1]
        worst = min(worst, margin)
        ok &= margin >= -slack * lams[-1]
    # extremizer saturates the bound
    chi = eig.chi.active_values
    extremal_gap = abs(chi @ (ops.A @ chi) / (chi @ (ops.M_omega @ chi)) - lams[-1]) / lams[-1]
    ok &= extremal_gap < 1e-8
    dr = _drift(lams)
    ok &= dr < drift_tol
    return Certificate(
        "poincare", {"lambda1": lams[-1], "lambda1_sweep": lams,
                     "worst_margin": worst, "extremal_gap": extremal_gap,
                     "drift": dr},
        slack, bool(ok), _sweep_digest(sweep, samples.describe()))


def certify_hardy(sweep: list[OperatorSet], samples: FunctionFamily,
                  drift_tol: float = 0.25) -> Certificate:
    """Boundary-weighted L2 mass controlled by the Dirichlet energy."""
    sups = []
    scale_gap = 0.0
    for ops in sweep:
        mesh = ops.mesh
        s = ops.kernel.s
        idx = ops.dirichlet_indices()
        fs = family_functions(samples, mesh.partition)
        sup = 0.0
        for f in fs:
            phi_act = np.zeros(ops.n)
            phi_act[idx] = _interp_active(mesh, f)[idx]
            phi = Field.from_active(mesh, phi_act)
            W = _weighted_boundary_mass(mesh, phi, 2 * s)
            En = phi_act @ (ops.A @ phi_act) * (2.0 / ops.kernel.a_ns)
            if En <= 0:
                continue
            ratio = W / En
            if ops is sweep[-1]:
                ratio2 = _weighted_boundary_mass(mesh, Field.from_active(mesh, 2 * phi_act), 2 * s) \
                    / ((2 * phi_act) @ (ops.A @ (2 * phi_act)) * (2.0 / ops.kernel.a_ns))
                scale_gap = max(scale_gap, abs(ratio2 / ratio - 1.0))
            sup = max(sup, ratio)
        sups.append(sup)
    dr = _drift(sups)
    ok = np.isfinite(sups[-1]) and sups[-1] > 0 and dr < drift_tol and scale_gap < 1e-12
    return Certificate(
        "hardy", {"best_constant": sups[-1], "sweep": sups, "drift": dr,
                  "scaling_gap": scale_gap},
        drift_tol, bool(ok), _sweep_digest(sweep, samples.describe()))


def _weighted_boundary_mass(mesh: Mesh, phi: Field, power: float) -> float:
    """int_omega phi^2 / delta^power, exact per element via shifted moments.

    delta is piecewise linear with a kink at each component midpoint;
    elements are split there and the squared field (a quadratic) is
    integrated against |x-E|^{-power} in closed form.
    """
    from .assembly import _poly_power_integral
    total = 0.0
    part = mesh.partition
    for e in np.flatnonzero(mesh.el_region == OMEGA):
        n0, n1 = mesh.elements[e]
        a, b = mesh.nodes[n0], mesh.nodes[n1]
        comp = next(iv for iv in part.omega if iv.lo <= a and b <= iv.hi)
        mid = 0.5 * (comp.lo + comp.hi)
        v0, v1 = phi.node_values[n0], phi.node_values[n1]
        c1 = (v1 - v0) / (b - a)
        c0 = v0 - c1 * a
        pieces = []
        if a < mid < b:
            pieces = [(a, mid, comp.lo), (mid, b, comp.hi)]
        else:
            E = comp.lo if 0.5 * (a + b) <= mid else comp.hi
            pieces = [(a, b, E)]
        for (aa, bb, E) in pieces:
            # (c0 + c1 x)^2 in powers of (x - E)
            A0 = c0 + c1 * E
            coeffs = [A0 * A0, 2 * A0 * c1, c1 * c1]
            total += float(_poly_power_integral(coeffs, np.array([aa]),
                                                np.array([bb]), np.array([E]),
                                                -power)[0])
    return total


def certify_weighted_sobolev(sweep: list[OperatorSet], samples: FunctionFamily,
                             r: float, r_ceiling: float = 4.0,
                             drift_tol: float = 0.25) -> Certificate:
    """Interpolated Sobolev bound with the solution-weighted energy on the right."""
    s = sweep[-1].kernel.s
    if r < 0:
        raise DomainError("r must be nonnegative")
    if r > 0 and s < 0.5 and r > 2.0 / (1.0 - 2 * s):
        raise DomainError(f"r={r} exceeds the critical exponent for s={s}")
    if r > r_ceiling:
        raise DomainError(f"r={r} exceeds the configured ceiling {r_ceiling}")
    q = 2.0 + 2.0 * r * s
    bests, scale_gap = [], 0.0
    for ops in sweep:
        mesh = ops.mesh
        u = solve_xi0(ops)
        B = weighted_pair_form(ops, u)
        fs = family_functions(samples, mesh.partition)
        phis = [_interp_active(mesh, f) for f in fs]
        # the active-space "constant": one at every unknown
        phis.append(np.ones(ops.n))
        best = 0.0
        for phi_act in phis:
            phi = Field.from_active(mesh, phi_act)
            lhs = _integral_omega(mesh, lambda x: np.clip(u(x), 0, None) ** r
                                  * np.abs(phi(x)) ** q) ** (1.0 / q)
            mass = _integral_omega(mesh, lambda x: u(x) ** 2 * phi(x) ** 2)
            rhs = np.sqrt(phi_act @ (B @ phi_act) + mass)
            if rhs <= 0:
                continue
            ratio = lhs / rhs
            if ops is sweep[-1]:
                lhs2 = _integral_omega(mesh, lambda x: np.clip(u(x), 0, None) ** r
                                       * np.abs(2 * phi(x)) ** q) ** (1.0 / q)
                rhs2 = np.sqrt((2 * phi_act) @ (B @ (2 * phi_act))
                               + _integral_omega(mesh, lambda x: u(x) ** 2 * (2 * phi(x)) ** 2))
                scale_gap = max(scale_gap, abs((lhs2 / rhs2) / ratio - 1.0))
            best = max(best, ratio)
        bests.append(best)
    dr = _drift(bests)
    ok = np.isfinite(bests[-1]) and bests[-1] > 0 and dr < drift_tol and scale_gap < 1e-12
    return Certificate(
        "weighted_sobolev", {"best_constant": bests[-1], "sweep": bests,
                             "drift": dr, "r": r, "q": q, "scaling_gap": scale_gap},
        drift_tol, bool(ok), _sweep_digest(sweep, samples.describe(), r))


def certify_linfty_ratio(sweep: list[OperatorSet], g_family: FunctionFamily,
                         p: float | None = None,
                         drift_tol: float = 0.25) -> Certificate:
    """sup (v/u) over omega controlled by the L^p norm of v's source."""
    s = sweep[-1].kernel.s
    if p is None:
        p = 2.0 / s
    if p <= 1.0 / s:
        raise DomainError(f"p={p} must exceed 1/s={1 / s}")
    sups = []
    for ops in sweep:
        mesh = ops.mesh
        u = solve_xi0(ops)
        idx = ops.dirichlet_indices()
        nodes_u = u.active_values[idx]
        sup = 0.0
        for g in family_functions(g_family, mesh.partition):
            Fg = assemble_load(mesh, g, ops.quad)
            v = solve_elliptic(MIXED, ops, Fg)
            norm_g = _integral_omega(mesh, lambda x: np.abs(g(x)) ** p) ** (1.0 / p)
            ratio = np.max(v.active_values[idx] / nodes_u) / norm_g
            sup = max(sup, ratio)
        sups.append(sup)
    dr = _drift(sups)
    ok = np.isfinite(sups[-1]) and sups[-1] > 0 and dr < drift_tol
    return Certificate(
        "linfty_ratio", {"best_constant": sups[-1], "sweep": sups, "drift": dr,
                         "p": p},
        drift_tol, bool(ok), _sweep_digest(sweep, g_family.describe(), p))


def certify_elliptic_hopf(sweep: list[OperatorSet], f_family: FunctionFamily,
                          drift_tol: float = 0.25,
                          identity_tol: float = 1e-10) -> Certificate:
    """Solutions dominate the unit-source gauge times the data pairing."""
    mins = []
    identity_gap = np.nan
    for ops in sweep:
        mesh = ops.mesh
        xi0 = solve_xi0(ops)
        idx = ops.dirichlet_indices()
        xi_nodes = xi0.active_values[idx]
        c_min = np.inf
        for f in family_functions(f_family, mesh.partition):
            F = assemble_load(mesh, f, ops.quad)
            u = solve_elliptic(MIXED, ops, F)
            pairing = float(F.values @ xi0.active_values)
            c_emp = np.min(u.active_values[idx] / xi_nodes) / pairing
            c_min = min(c_min, c_emp)
        if ops is sweep[-1]:
            F1 = assemble_load(mesh, lambda x: np.ones_like(x), ops.quad)
            u1 = solve_elliptic(MIXED, ops, F1)
            pairing1 = float(F1.values @ xi0.active_values)
            c1 = np.min(u1.active_values[idx] / xi_nodes) / pairing1
            identity_gap = abs(c1 * pairing1 - 1.0)
        mins.append(c_min)
    dr = _drift(mins)
    ok = mins[-1] > 0 and dr < drift_tol and identity_gap < identity_tol
    return Certificate(
        "elliptic_hopf", {"min_constant": mins[-1], "sweep": mins, "drift": dr,
                          "unit_source_identity_gap": identity_gap},
        drift_tol, bool(ok), _sweep_digest(sweep, f_family.describe()))


def certify_eigen_comparison(sweep: list[OperatorSet],
                             drift_tol: float = 0.15) -> Certificate:
    """Two-sided nodewise comparability of the eigenfunction and the gauge."""
    ups, downs = [], []
    floors_ok = True
    for ops in sweep:
        mesh = ops.mesh
        xi0 = solve_xi0(ops)
        eig = solve_eigen(MIXED, ops)
        idx = ops.dirichlet_indices()
        xi = xi0.active_values[idx]
        chi = eig.chi.active_values[idx]
        ups.append(float(np.max(chi / xi)))
        downs.append(float(np.max(xi / chi)))
        M = ops.M_omega
        cross = xi0.active_values @ (M @ eig.chi.active_values)
        floors_ok &= ups[-1] >= cross / (xi0.active_values @ (M @ xi0.active_values)) - 1e-12
        floors_ok &= downs[-1] >= cross / (eig.chi.active_values @ (M @ eig.chi.active_values)) - 1e-12
    dr = max(_drift(ups), _drift(downs))
    ok = (np.isfinite(ups[-1]) and np.isfinite(downs[-1]) and ups[-1] > 0
          and downs[-1] > 0 and ups[-1] * downs[-1] >= 1.0 - 1e-12
          and dr < drift_tol and floors_ok)
    return Certificate(
        "eigen_comparison", {"C_up": ups[-1], "C_down": downs[-1],
                             "C": max(ups[-1], downs[-1]),
                             "up_sweep": ups, "down_sweep": downs, "drift": dr},
        drift_tol, bool(ok), _sweep_digest(sweep))


def parabolic_grid(lam: float, t_lo_factor: float = 0.1,
                   t_hi_factor: float = 3.0, n: int = 15, substeps: int = 5):
    """Uniform observation grid in units of the relaxation time, plus dt."""
    t_lo = t_lo_factor / lam
    t_hi = t_hi_factor / lam
    grid = np.linspace(t_lo, t_hi, n)
    dt = (grid[1] - grid[0]) / substeps
    return grid, dt


def certify_parabolic_hopf(ops: OperatorSet, u0_family: FunctionFamily,
                           t_grid: Array | None = None,
                           stepper: str = IMPLICIT_EULER) -> Certificate:
    """Positivity of the heat flow against the gauge for all grid times."""
    mesh = ops.mesh
    s = ops.kernel.s
    xi0 = solve_xi0(ops)
    eig = solve_eigen(MIXED, ops)
    lam = eig.lambda1
    if t_grid is None:
        t_grid, dt = parabolic_grid(lam)
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        dt = (t_grid[1] - t_grid[0]) / 5
    idx = ops.dirichlet_indices()
    xi = xi0.active_values[idx]
    M = ops.M_omega
    all_pos = True
    worst = np.inf
    slopes = []
    for f in family_functions(u0_family, mesh.partition):
        u0 = _interp_active(mesh, f)
        pairing = float(u0 @ (M @ xi0.active_values))
        traj = solve_parabolic(ops, u0, t_grid[-1], dt, stepper)
        c_of_t = np.empty(len(t_grid))
        for i, t in enumerate(t_grid):
            ut = traj.at_time(round(t / dt) * dt)
            c_of_t[i] = np.min(ut[idx] / xi) / pairing
        worst = min(worst, c_of_t.min())
        all_pos &= bool(np.all(c_of_t > 0))
        small = t_grid <= t_grid[0] + 0.4 * (t_grid[-1] - t_grid[0])
        if np.all(c_of_t[small] > 0) and small.sum() >= 3:
            slopes.append(np.polyfit(np.log(t_grid[small]),
                                     np.log(c_of_t[small]) + lam * t_grid[small], 1)[0])
    gamma = 2 * s / (1 + 2 * s)
    return Certificate(
        "parabolic_hopf",
        {"min_over_grid": worst, "lambda1": lam,
         "fitted_small_t_slope": float(np.mean(slopes)) if slopes else np.nan,
         "reference_exponent_1_over_2gamma": 1.0 / (2 * gamma)},
        0.0, bool(all_pos), _sweep_digest([ops], u0_family.describe()),
        notes="small-t slope recorded, not asserted")


def monitor_theta(traj: Trajectory, eig: EigenPair, j_list=(1, 2),
                  drift_tol: float = 1e-8) -> Certificate:
    """Ratio moments of the flow against the decaying eigenmode never grow."""
    ops = traj.ops
    mesh = ops.mesh
    idx = ops.dirichlet_indices()
    w_lump = _lumped_omega(mesh)[idx]
    chi = eig.chi.active_values[idx]
    lam = eig.lambda1
    drifts = {}
    theta0 = {}
    ok = True
    for j in j_list:
        thetas = np.empty(len(traj.times))
        for i, t in enumerate(traj.times):
            u = traj.states[i][idx]
            if np.any(u <= 0):
                raise RatioError(f"flow vanished at an interior node at t={t}")
            w = np.exp(-lam * t) * chi / u
            thetas[i] = float(np.sum(w_lump * u ** 2 * w ** (2 * j)))
        step_drift = np.diff(thetas)
        worst = float(step_drift.max()) if len(step_drift) else 0.0
        drifts[f"worst_step_increase_j{j}"] = worst
        theta0[f"theta0_j{j}"] = thetas[0]
        ok &= worst <= drift_tol * thetas[0]
    return Certificate(
        "theta_monotonicity", {**drifts, **theta0, "j_list": list(j_list)},
        drift_tol, bool(ok), _digest(ops.meta.get("mesh"), tuple(j_list),
                                     len(traj.times), traj.dt))


def certify_delta_lower_bounds(sweep: list[OperatorSet], family: FunctionFamily,
                               mode: str = "elliptic",
                               t_grid: Array | None = None,
                               stepper: str = IMPLICIT_EULER,
                               drift_tol: float = 0.25) -> Certificate:
    """Solutions dominate dist(x, boundary)^s times the data pairing."""
    mins = []
    for ops in sweep:
        mesh = ops.mesh
        s = ops.kernel.s
        idx = ops.dirichlet_indices()
        xs = mesh.nodes[mesh.active[idx]]
        ds = _delta(mesh, xs) ** s
        if mode == "parabolic":
            eig = solve_eigen(MIXED, ops)
            if t_grid is None:
                grid, dt = parabolic_grid(eig.lambda1)
            else:
                grid = np.asarray(t_grid, dtype=float)
                dt = (grid[1] - grid[0]) / 5
        worst = np.inf
        for f in family_functions(family, mesh.partition):
            pairing = _integral_omega(mesh, lambda x: f(x) * _delta(mesh, x) ** s)
            if mode == "elliptic":
                F = assemble_load(mesh, f, ops.quad)
                u = solve_elliptic(MIXED, ops, F)
                worst = min(worst, np.min(u.active_values[idx] / ds) / pairing)
            else:
                u0 = _interp_active(mesh, f)
                traj = solve_parabolic(ops, u0, grid[-1], dt, stepper)
                for t in grid:
                    ut = traj.at_time(round(t / dt) * dt)
                    worst = min(worst, np.min(ut[idx] / ds) / pairing)
        mins.append(worst)
    dr = _drift(mins)
    ok = mins[-1] > 0 and dr < drift_tol
    return Certificate(
        f"delta_lower_bound_{mode}", {"min_constant": mins[-1], "sweep": mins,
                                      "drift": dr},
        drift_tol, bool(ok), _sweep_digest(sweep, family.describe(), mode))


# ---------------------------------------------------------------------------
# Green-type identity and comparison checks
# ---------------------------------------------------------------------------

def green_identity_gap(ops: OperatorSet, u: Field, phi: Field,
                       levels: int | None = None) -> dict:
    """Compare the bilinear form with the pointwise-operator pairing.

    The right side integrates phi against the principal-value operator on
    omega and against the nonlocal flux on sigma2, with panels graded into
    every mesh node (the pointwise operator has integrable dist^{1-2s}
    spikes there).
    """
    from .assembly import _graded_composite
    mesh = ops.mesh
    quad = ops.quad
    levels = levels or quad.composite_levels
    lhs = float(phi.active_values @ (ops.A @ u.active_values))

    rhs = 0.0
    for e in range(len(mesh.elements)):
        a = mesh.nodes[mesh.elements[e, 0]]
        b = mesh.nodes[mesh.elements[e, 1]]
        X, W = _graded_composite(a, b, quad, toward_both=True, levels=levels)
        if mesh.el_region[e] == OMEGA:
            vals = pv_fractional_laplacian(u, X)
        else:
            vals = neumann_derivative(u, X)
        rhs += float(np.sum(W * phi(X) * vals))
    gap = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "rel_gap": gap}


def certify_green_identity(ops: OperatorSet, pairs: list[tuple[Field, Field]],
                           tol: float = 1e-6) -> Certificate:
    """Form-vs-operator agreement for smooth test pairs, refined on failure."""
    gaps = []
    for (u, phi) in pairs:
        levels = ops.quad.composite_levels
        for attempt in range(ops.quad.refine_cap):
            res = green_identity_gap(ops, u, phi, levels=levels)
            if res["rel_gap"] < tol:
                break
            levels += 6
        else:
            raise QuadratureError(
                f"identity gap {res['rel_gap']:.2e} above {tol} at refinement cap")
        gaps.append(res["rel_gap"])
    return Certificate(
        "green_identity", {"max_rel_gap": max(gaps), "gaps": gaps},
        tol, bool(max(gaps) < tol), _digest(ops.meta.get("mesh"), len(pairs)))


def certify_comparison(sweep: list[OperatorSet], f_family: FunctionFamily,
                       slack_factor: float = 1e-10) -> Certificate:
    """Mixed solutions dominate Dirichlet solutions for the same source."""
    ops = sweep[-1]
    mesh = ops.mesh
    idx = ops.dirichlet_indices()
    worst = np.inf
    for f in family_functions(f_family, mesh.partition):
        F = assemble_load(mesh, f, ops.quad)
        um = solve_elliptic(MIXED, ops, F)
        ud = solve_elliptic(DIRICHLET, ops, F)
        diff = um.active_values - ud.active_values
        worst = min(worst, float(diff.min() / max(np.abs(um.active_values).max(), 1e-300)))
    ok = worst >= -slack_factor
    return Certificate(
        "mixed_vs_dirichlet", {"worst_relative_deficit": worst},
        slack_factor, bool(ok), _sweep_digest(sweep, f_family.describe()))
