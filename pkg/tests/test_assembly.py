import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from fracmix import (BoundaryDatum, Field, KernelParams, QuadSpec,
                     assemble_load, assemble_mass, assemble_stiffness,
                     build_mesh, dirichlet_lift, normalization_constant,
                     solve_elliptic, weighted_pair_form)
from fracmix.assembly import killing_matrix, pair_form_matrix

from fracmix.solve import MIXED

from conftest import default_partition


def _brute_entry(m, s, ni, nj, weight_vals=None):
    """Entry of the bilinear form by nested adaptive quadrature (QUADPACK)."""
    a_ns = normalization_constant(s)
    nodes = [float(v) for v in m.nodes]
    part = m.partition

    def hat_factory(k):
        xk = nodes[k]
        xl = nodes[k - 1] if k > 0 else None
        xr = nodes[k + 1] if k + 1 < len(nodes) else None

        def hat(x):
            if xl is not None and xl < x <= xk:
                return (x - xl) / (xk - xl)
            if xr is not None and xk <= x < xr:
                return (xr - x) / (xr - xk)
            return 1.0 if x == xk and xl is None and xr is None else 0.0
        return hat

    phi_i = hat_factory(ni)
    phi_j = hat_factory(nj)

    if weight_vals is None:
        def w_of(x):
            return 1.0
    else:
        wv = [float(v) for v in weight_vals]

        def w_of(x):
            if x < nodes[0] or x > nodes[-1]:
                return 0.0
            import bisect
            k = min(max(bisect.bisect_right(nodes, x) - 1, 0), len(nodes) - 2)
            t = (x - nodes[k]) / (nodes[k + 1] - nodes[k])
            return wv[k] * (1 - t) + wv[k + 1] * t

    def integrand(y, x):
        return (w_of(x) * w_of(y) * (phi_i(x) - phi_i(y))
                * (phi_j(x) - phi_j(y)) * abs(x - y) ** (-1 - 2 * s))

    pts = list(nodes)

    def inner(x, ylo, yhi):
        ps = sorted(set(p for p in pts + [x] if ylo < p < yhi))
        val, _ = quad(integrand, ylo, yhi, args=(x,), points=ps, limit=200,
                      epsabs=1e-10, epsrel=1e-9)
        return val

    def dbl(xlo, xhi, ylo, yhi):
        ps = sorted(set(p for p in pts if xlo < p < xhi))
        val, _ = quad(lambda x: inner(x, ylo, yhi), xlo, xhi, points=ps,
                      limit=200, epsabs=1e-9, epsrel=1e-8)
        return val

    box = (nodes[0], nodes[-1])
    BB = dbl(*box, *box)
    s2lo, s2hi = part.sigma2[0].lo, part.sigma2[0].hi
    SS = dbl(s2lo, s2hi, s2lo, s2hi)
    if weight_vals is not None:
        return BB - SS  # raw form; the weight vanishes on sigma1

    def kappa(x):
        total = 0.0
        for iv in part.sigma1:
            if np.isfinite(iv.lo):
                d0, d1 = iv.lo - x, (iv.hi - x if np.isfinite(iv.hi) else None)
            else:
                d0, d1 = x - iv.hi, None
            total += (abs(d0) ** (-2 * s) - (abs(d1) ** (-2 * s) if d1 else 0.0)) / (2 * s)
        return total

    kil, _ = quad(lambda x: phi_i(x) * phi_j(x) * kappa(x),
                  -1, 1, points=[p for p in pts if -1 < p < 1], limit=400,
                  epsabs=1e-12, epsrel=1e-10)
    return 0.5 * a_ns * (BB - SS + 2 * kil)


@pytest.mark.parametrize("s", [0.6, 0.5])
def test_stiffness_matches_bruteforce_oracle(s):
    warnings.filterwarnings("ignore")
    p = default_partition(s)
    m = build_mesh(p, 4, 2)
    ops = assemble_stiffness(m, KernelParams(s))
    act = m.active
    # structurally distinct entries: same-element diagonal, adjacent,
    # well-separated, omega/sigma2 interface, and reflecting-side pairs
    cases = [(0, 0), (0, 1), (0, 3), (1, 1), (2, 2), (2, 3), (3, 4), (4, 4)]
    worst = 0.0
    for (ii, jj) in cases:
        ref = _brute_entry(m, s, act[ii], act[jj])
        got = ops.A[ii, jj]
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12))
    assert worst < 1e-6


def test_weighted_form_matches_bruteforce_oracle():
    warnings.filterwarnings("ignore")
    s = 0.4
    p = default_partition(s)
    m = build_mesh(p, 4, 2)
    ops = assemble_stiffness(m, KernelParams(s))
    wf = Field.interpolate(m, lambda x: np.where(np.abs(x) <= 1, 1 - 0.4 * x ** 2, 0.0))
    wvals = wf.node_values.copy()
    B = weighted_pair_form(ops, wf)
    act = m.active
    # weight vanishing off omega kills the sigma1 part; check two entries
    for (ii, jj) in ((1, 1), (1, 2)):
        ref = _brute_entry(m, s, act[ii], act[jj], weight_vals=wvals)
        assert abs(B[ii, jj] - ref) < 1e-6 * max(abs(ref), 1e-10)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_stiffness_symmetry_and_definiteness(s, ops_small):
    A = ops_small[s].A
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))
    w = np.linalg.eigvalsh(A)
    assert w.min() > 0


def test_pair_form_annihilates_constants(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    P = pair_form_matrix(m, 0.5, ops.quad)
    assert np.max(np.abs(P @ np.ones(len(m.nodes)))) < 1e-12


def test_disjoint_support_entries_nonpositive(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    act = m.active
    xs = m.nodes[act]
    A = ops.A
    # pairs of hats whose supports are separated by at least one node gap
    for i in range(0, len(act), 5):
        for j in range(i + 3, len(act), 7):
            # skip pairs coupled through the sigma1 weight (overlapping hats)
            if abs(xs[i] - xs[j]) > 3 * np.max(np.diff(m.nodes)):
                assert A[i, j] <= 1e-14


def test_mass_matrix_row_sums_and_shapes(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    M_om = assemble_mass(m, "omega")
    M_full = assemble_mass(m, "full")
    assert np.isclose(M_om.sum(), 2.0 - _elim_hat_mass(m, region="omega"))
    # rows of the omega mass vanish for purely exterior basis functions
    ext = ops.exterior_indices()
    assert np.max(np.abs(M_om[ext])) == 0.0
    wm = np.linalg.eigvalsh(M_om)
    assert wm.min() > -1e-14                      # positive semidefinite
    wf = np.linalg.eigvalsh(M_full)
    assert wf.min() > 0                           # positive definite


def _elim_hat_mass(m, region):
    # mass carried by eliminated hats (not part of the active matrices)
    from fracmix.assembly import mass_matrix_nodes
    M = mass_matrix_nodes(m, region)
    elim = np.flatnonzero(m.active_map < 0)
    total = M.sum() - M[np.ix_(m.active, m.active)].sum()
    return total


def test_mass_diagonal_example():
    # uniform 2-element mesh on (-1,1): interior-node diagonal entry 2h/3
    p = default_partition(0.5)
    m = build_mesh(p, 4, 2)  # h = 0.5 on omega
    M = assemble_mass(m, "omega")
    i = np.flatnonzero(m.nodes[m.active] == 0.0)[0]
    assert np.isclose(M[i, i], 2 * 0.5 / 3)


def test_load_examples(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    F0 = assemble_load(m, lambda x: np.zeros_like(x))
    assert np.all(F0.values == 0)
    F1 = assemble_load(m, lambda x: np.ones_like(x))
    # entries sum to measure(omega) minus the share of the two pinned hats
    assert np.isclose(F1.values.sum(), 2.0 - _elim_hat_load(m))
    ext = ops.exterior_indices()
    assert np.max(np.abs(F1.values[ext])) == 0.0
    # a bump inside one element loads only that element's nodes
    xs = m.nodes[m.active]
    el = m.elements[3]
    a, b = m.nodes[el[0]], m.nodes[el[1]]
    c, w = 0.5 * (a + b), 0.25 * (b - a)
    fb = lambda x: np.clip(1 - ((np.asarray(x) - c) / w) ** 2, 0, None) ** 2
    Fb = assemble_load(m, fb)
    touched = np.flatnonzero(np.abs(Fb.values) > 1e-15)
    assert set(m.active[touched]).issubset({el[0], el[1]})


def _elim_hat_load(m):
    import numpy as np
    elim = np.flatnonzero(m.active_map < 0)
    total = 0.0
    for e in elim:
        x = m.nodes[e]
        if not m.partition.in_closure_omega(x):
            continue
        sel = np.flatnonzero((m.elements == e).any(axis=1) & (m.el_region == 0))
        for el in sel:
            h = m.nodes[m.elements[el, 1]] - m.nodes[m.elements[el, 0]]
            total += h / 2
    return total


def test_lift_zero_datum_is_noop(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    F = assemble_load(m, lambda x: np.ones_like(x))
    h0 = BoundaryDatum(far_const=0.0)
    F2, bnd = dirichlet_lift(m, ops, h0, F)
    assert np.allclose(F2.values, F.values)
    assert np.all(bnd.node_values == 0)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_lift_constant_datum_gives_constant_solution(s, ops_small):
    ops = ops_small[s]
    m = ops.mesh
    F0 = assemble_load(m, lambda x: np.zeros_like(x))
    h1 = BoundaryDatum(far_const=1.0)
    F, _ = dirichlet_lift(m, ops, h1, F0)
    u = solve_elliptic(MIXED, ops, F)
    assert np.max(np.abs(u.active_values - 1.0)) < 1e-8


def test_lift_linearity(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    F0 = assemble_load(m, lambda x: np.zeros_like(x))
    win = (-4.0, 5.0)
    h1 = BoundaryDatum(far_const=1.0, fn=lambda y: 1 + 0.5 * np.sin(y), window=win)
    h2 = BoundaryDatum(far_const=0.5, fn=lambda y: 0.5 + 0.1 * y ** 0, window=win)
    h3 = BoundaryDatum(far_const=1.0 + 2 * 0.5,
                       fn=lambda y: 1 + 0.5 * np.sin(y) + 2 * 0.6, window=win)
    Fa, _ = dirichlet_lift(m, ops, h1, F0)
    Fb, _ = dirichlet_lift(m, ops, h2, F0)
    Fc, _ = dirichlet_lift(m, ops, h3, F0)
    assert np.allclose(Fc.values, Fa.values + 2 * Fb.values, rtol=1e-10, atol=1e-12)


def test_lift_missing_far_const_rejected():
    from fracmix.errors import ConfigError
    with pytest.raises(ConfigError):
        BoundaryDatum(far_const=None)
    with pytest.raises(ConfigError):
        BoundaryDatum(far_const=1.0, fn=lambda y: y)  # window required


def test_galerkin_orthogonality(ops_small):
    ops = ops_small[0.5]
    m = ops.mesh
    F = assemble_load(m, lambda x: np.exp(-x ** 2))
    u = solve_elliptic(MIXED, ops, F)
    r = ops.A @ u.active_values - F.values
    assert np.linalg.norm(r) < 1e-10 * np.linalg.norm(F.values)


def test_quadspec_validation():
    from fracmix.errors import ConfigError
    with pytest.raises(ConfigError):
        QuadSpec(pair_order=1)


def test_operator_dump(tmp_path, ops_small):
    from fracmix.assembly import dump_operators
    ops = ops_small[0.5]
    files = dump_operators(ops, tmp_path / "mats")
    assert len(files) == 3
    first = open(files[0]).readline()
    assert ops.meta["mesh"] in first
