import numpy as np
import pytest
from scipy.linalg import eigh

from fracmix import (DIRICHLET, IMPLICIT_EULER, MIXED, TRAPEZOIDAL, Field,
                     GradingSpec, KernelParams, assemble_load,
                     assemble_stiffness, build_mesh, pv_of_profile,
                     solve_eigen, solve_elliptic, solve_parabolic, solve_xi0)
from fracmix.solve import harmonic_extension
from fracmix.errors import ConfigError

from conftest import default_partition, symmetric_partition


def test_zero_load_gives_zero(ops_small):
    ops = ops_small[0.5]
    F = assemble_load(ops.mesh, lambda x: np.zeros_like(x))
    for mode in (MIXED, DIRICHLET):
        u = solve_elliptic(mode, ops, F)
        assert np.all(u.node_values == 0)


@pytest.mark.parametrize("s", [0.25, 0.5])
def test_dirichlet_unit_source_profile(s):
    # the pure-Dirichlet solve approaches K_s (1-x^2)^s with K_s calibrated
    # by the pointwise operator
    p = default_partition(s)
    fn = lambda y: np.clip(1 - np.asarray(y, dtype=float) ** 2, 0, None) ** s
    Ks = 1.0 / np.mean(pv_of_profile(p, fn, np.array([-0.6, -0.3, 0.0, 0.3, 0.6])))
    m = build_mesh(p, 96, 16, GradingSpec("geometric", 0.85, "both"))
    ops = assemble_stiffness(m, KernelParams(s))
    F = assemble_load(m, lambda x: np.ones_like(x))
    u = solve_elliptic(DIRICHLET, ops, F)
    xs = np.linspace(-0.95, 0.95, 41)
    err = np.max(np.abs(u(xs) - Ks * fn(xs))) / np.max(Ks * fn(xs))
    assert err < 0.02


def test_mixed_dominates_dirichlet_battery(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    rng = np.random.default_rng(12)
    for _ in range(10):
        c = rng.uniform(-0.7, 0.7)
        w = rng.uniform(0.15, 0.5)
        f = lambda x: np.clip(1 - ((np.asarray(x) - c) / w) ** 2, 0, None) ** 2
        F = assemble_load(m, f)
        um = solve_elliptic(MIXED, ops, F)
        ud = solve_elliptic(DIRICHLET, ops, F)
        gap = um.active_values - ud.active_values
        assert gap.min() >= -1e-10 * np.abs(um.active_values).max()
        assert um.active_values.min() >= -1e-10 * np.abs(um.active_values).max()


def test_xi0_positive_and_dominates_dirichlet(ops_small):
    for s, ops in ops_small.items():
        xi0 = solve_xi0(ops)
        assert xi0.active_values.min() > 0
        F = assemble_load(ops.mesh, lambda x: np.ones_like(x))
        ud = solve_elliptic(DIRICHLET, ops, F)
        assert np.all(xi0.active_values - ud.active_values >= -1e-12)


def test_xi0_even_for_symmetric_configuration():
    p = symmetric_partition(0.5)
    m = build_mesh(p, 32, 16)
    ops = assemble_stiffness(m, KernelParams(0.5))
    xi0 = solve_xi0(ops)
    vals = xi0.node_values
    flipped = np.interp(-m.nodes, m.nodes, vals)
    assert np.max(np.abs(vals - flipped)) < 1e-10 * np.abs(vals).max()


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_eigen_rayleigh_identity_and_ordering(s, ops_small):
    ops = ops_small[s]
    em = solve_eigen(MIXED, ops)
    ed = solve_eigen(DIRICHLET, ops)
    assert em.lambda1 > 0
    assert em.lambda1 <= ed.lambda1
    chi = em.chi.active_values
    rq = chi @ (ops.A @ chi) / (chi @ (ops.M_omega @ chi))
    assert abs(rq - em.lambda1) <= 1e-10 * em.lambda1
    # unit interior mass, nonnegative
    assert np.isclose(chi @ (ops.M_omega @ chi), 1.0, rtol=1e-12)
    assert em.chi.active_values.min() > -1e-12


def test_eigen_matches_dense_generalized_solver(ops_small):
    # oracle: direct dense generalized eigensolver on the reduced pencil
    ops = ops_small[0.5]
    I = ops.interior_indices()
    E = ops.exterior_indices()
    A_II = ops.A[np.ix_(I, I)]
    A_IE = ops.A[np.ix_(I, E)]
    A_EE = ops.A[np.ix_(E, E)]
    S = A_II - A_IE @ np.linalg.solve(A_EE, A_IE.T)
    M_II = ops.M_omega[np.ix_(I, I)]
    lam_ref = eigh(S, M_II, eigvals_only=True)[0]
    em = solve_eigen(MIXED, ops)
    assert np.isclose(em.lambda1, lam_ref, rtol=1e-10)


def test_eigen_residual_in_full_space(ops_small):
    ops = ops_small[0.5]
    em = solve_eigen(MIXED, ops)
    chi = em.chi.active_values
    r = ops.A @ chi - em.lambda1 * (ops.M_omega @ chi)
    assert np.linalg.norm(r) <= 1e-9 * np.linalg.norm(ops.A @ chi)


def test_harmonic_extension_zeroes_exterior_residual(ops_small):
    ops = ops_small[0.5]
    rng = np.random.default_rng(0)
    u = rng.normal(size=ops.n)
    ue = harmonic_extension(ops, u)
    E = ops.exterior_indices()
    resid = (ops.A @ ue)[E]
    assert np.max(np.abs(resid)) < 1e-10 * np.max(np.abs(ops.A @ ue))


def test_parabolic_zero_stays_zero(ops_small):
    ops = ops_small[0.5]
    traj = solve_parabolic(ops, np.zeros(ops.n), t_end=1.0, dt=0.25)
    assert np.all(traj.states == 0)


@pytest.mark.parametrize("stepper", [IMPLICIT_EULER, TRAPEZOIDAL])
def test_parabolic_energy_decay_and_positivity(ops_small, stepper):
    ops = ops_small[0.5]
    m = ops.mesh
    rng = np.random.default_rng(4)
    for _ in range(5):
        c = rng.uniform(-0.6, 0.6)
        w = rng.uniform(0.2, 0.5)
        u0 = np.clip(1 - ((m.nodes[m.active] - c) / w) ** 2, 0, None)
        traj = solve_parabolic(ops, u0, t_end=2.0, dt=0.1, stepper=stepper)
        l2 = traj.interior_l2()
        assert np.all(np.diff(l2) <= 1e-12 * l2[0])
        if stepper == IMPLICIT_EULER:
            assert traj.states.min() >= -1e-10 * np.abs(u0).max()


def test_parabolic_eigen_decay_trapezoidal(ops_small):
    ops = ops_small[0.5]
    em = solve_eigen(MIXED, ops)
    lam = em.lambda1
    dt = 1.0 / (20 * lam)                     # one halving from (10 lam)^-1
    n = int(round((1 / lam) / dt))
    traj = solve_parabolic(ops, em.chi, n * dt, dt, TRAPEZOIDAL)
    ratio = traj.states[-1] * np.exp(lam * traj.times[-1]) / em.chi.active_values
    assert ratio.min() > 0.99 and ratio.max() < 1.01


def test_parabolic_grid_mismatch_rejected(ops_small):
    ops = ops_small[0.5]
    traj = solve_parabolic(ops, np.zeros(ops.n), t_end=1.0, dt=0.25)
    with pytest.raises(ConfigError):
        traj.at_time(0.3)


def test_invalid_stepper_rejected(ops_small):
    ops = ops_small[0.5]
    with pytest.raises(ConfigError):
        solve_parabolic(ops, np.zeros(ops.n), 1.0, 0.1, stepper="leapfrog")
