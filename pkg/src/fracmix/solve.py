"""Elliptic solves, the principal eigenpair, and parabolic time stepping.

Unknowns on the reflecting region carry no interior mass, so the mixed
eigenproblem and the heat flow are differential-algebraic: those DoFs are
enslaved to the interior through the energy matrix.  The eigensolver works
on the Schur complement; the steppers solve the coupled system directly,
which enforces the algebraic rows at the new time level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .assembly import LoadVector, OperatorSet, assemble_load
from .errors import ConfigError, ConvergenceError, SingularMatrixError, StepError
from .kernel import Field

Array = np.ndarray

MIXED = "mixed"
DIRICHLET = "dirichlet"

IMPLICIT_EULER = "implicit_euler"
TRAPEZOIDAL = "trapezoidal"


def _factor(ops: OperatorSet, key: str, matrix: Array):
    cache = ops.meta.setdefault("_factors", {})
    if key not in cache:
        try:
            cache[key] = cho_factor(matrix)
        except LinAlgError as exc:
            raise SingularMatrixError(
                f"factorization '{key}' failed; the restricted form lost "
                f"positive definiteness") from exc
    return cache[key]


def _active_indices(ops: OperatorSet, mode: str) -> Array:
    if mode == MIXED:
        return np.arange(ops.n)
    if mode == DIRICHLET:
        return ops.dirichlet_indices()
    raise ConfigError(f"unknown solve mode {mode!r}")


def solve_elliptic(mode: str, ops: OperatorSet, F: LoadVector) -> Field:
    """Solve the stiffness system A u = F in mixed or pure-Dirichlet mode.

    Dirichlet mode additionally pins every DoF outside the open domain
    (reflecting-region values are data, not unknowns there).
    """
    idx = _active_indices(ops, mode)
    u = np.zeros(ops.n)
    if mode == MIXED:
        c = _factor(ops, "A", ops.A)
        u[:] = cho_solve(c, F.values)
        resid = np.linalg.norm(ops.A @ u - F.values)
    else:
        A_dd = ops.A[np.ix_(idx, idx)]
        c = _factor(ops, "A_dir", A_dd)
        u[idx] = cho_solve(c, F.values[idx])
        resid = np.linalg.norm(A_dd @ u[idx] - F.values[idx])
    scale = np.linalg.norm(F.values)
    if scale > 0 and resid > 1e-10 * scale:
        raise SingularMatrixError(f"relative residual {resid / scale:.2e} > 1e-10")
    return Field.from_active(ops.mesh, u)


def solve_xi0(ops: OperatorSet) -> Field:
    """Mixed solution with unit source; the comparison gauge of the theory."""
    F = assemble_load(ops.mesh, lambda x: np.ones_like(x), ops.quad, source="one")
    return solve_elliptic(MIXED, ops, F)


@dataclass(frozen=True)
class EigenPair:
    """Principal eigenvalue and interior-L2-normalized eigenfunction."""

    lambda1: float
    chi: Field
    mode: str
    residual: float
    iterations: int


def _schur_blocks(ops: OperatorSet):
    I = ops.interior_indices()
    E = ops.exterior_indices()
    A_II = ops.A[np.ix_(I, I)]
    M_II = ops.M_omega[np.ix_(I, I)]
    if len(E) == 0:
        return I, E, A_II, M_II, None, None
    A_IE = ops.A[np.ix_(I, E)]
    A_EE = ops.A[np.ix_(E, E)]
    cEE = _factor(ops, "A_EE", A_EE)
    X = cho_solve(cEE, A_IE.T)          # A_EE^{-1} A_EI
    S = A_II - A_IE @ X
    return I, E, S, M_II, X, cEE


def harmonic_extension(ops: OperatorSet, u_active: Array) -> Array:
    """Overwrite reflecting-region components by the energy-harmonic values."""
    I, E, S, M_II, X, _ = _schur_blocks(ops)
    out = u_active.copy()
    if len(E):
        out[E] = -X @ u_active[I]
    return out


def solve_eigen(mode: str, ops: OperatorSet, tol: float = 1e-12,
                max_iter: int = 500) -> EigenPair:
    """Smallest eigenpair of A x = lambda M x by inverse power iteration.

    In mixed mode the zero-mass DoFs are eliminated through the Schur
    complement first and recovered by harmonic extension afterwards.
    The returned eigenfunction is nonnegative with unit interior L2 norm.
    """
    if mode == MIXED:
        I, E, S, M, X, _ = _schur_blocks(ops)
    else:
        I = _active_indices(ops, DIRICHLET)
        E = np.array([], dtype=int)
        S = ops.A[np.ix_(I, I)]
        M = ops.M_omega[np.ix_(I, I)]
        X = None
    cS = _factor(ops, f"S_{mode}", S)

    x = np.ones(len(I))
    x /= np.sqrt(x @ (M @ x))
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = cho_solve(cS, M @ x)
        y /= np.sqrt(y @ (M @ y))
        lam = y @ (S @ y)
        resid = np.linalg.norm(S @ y - lam * (M @ y))
        x = y
        if abs(lam - lam_old) < tol * abs(lam) and resid <= 1e-10 * np.linalg.norm(S @ y):
            break
        lam_old = lam
    else:
        raise ConvergenceError(f"eigen iteration did not converge in {max_iter} steps")

    u = np.zeros(ops.n)
    u[I] = x
    if mode == MIXED and len(E):
        u[E] = -X @ x
    if u[I].sum() < 0:
        u = -u
    # unit interior L2 norm
    nrm = np.sqrt(u @ (ops.M_omega @ u))
    u /= nrm
    return EigenPair(float(lam), Field.from_active(ops.mesh, u), mode,
                     float(resid), it)


@dataclass
class Trajectory:
    """Time grid and active-DoF states of a parabolic run."""

    ops: OperatorSet
    times: Array
    states: Array               # (n_times, n_active)
    stepper: str
    dt: float
    meta: dict = field(default_factory=dict)

    def field(self, i: int) -> Field:
        return Field.from_active(self.ops.mesh, self.states[i])

    def interior_l2(self) -> Array:
        M = self.ops.M_omega
        return np.sqrt(np.einsum("ti,ij,tj->t", self.states, M, self.states))

    def at_time(self, t: float) -> Array:
        i = int(round(t / self.dt))
        if not np.isclose(self.times[i], t, rtol=1e-9, atol=1e-12):
            raise ConfigError(f"t={t} is not on the trajectory grid")
        return self.states[i]


def solve_parabolic(ops: OperatorSet, u0, t_end: float, dt: float,
                    stepper: str = IMPLICIT_EULER) -> Trajectory:
    """March the heat flow: interior mass rows evolve, reflecting rows are
    algebraic constraints enforced at the new time level each step.

    ``u0`` may be a Field or an active-DoF vector; its reflecting-region
    components are replaced by the harmonic extension at t=0+.
    """
    if stepper not in (IMPLICIT_EULER, TRAPEZOIDAL):
        raise ConfigError(f"unknown stepper {stepper!r}")
    if dt <= 0 or t_end <= 0:
        raise ConfigError("dt and t_end must be positive")
    u = u0.active_values.copy() if isinstance(u0, Field) else np.asarray(u0, dtype=float).copy()
    if u.shape != (ops.n,):
        raise ConfigError("u0 does not match the active DoF count")
    u = harmonic_extension(ops, u)

    M = ops.M_omega
    A = ops.A
    if stepper == IMPLICIT_EULER:
        lhs = M / dt + A
        rhs = M / dt
    else:
        lhs = M / dt + 0.5 * A
        rhs = M / dt - 0.5 * A
    try:
        c = cho_factor(lhs)
    except LinAlgError as exc:
        raise StepError("stepper matrix is not positive definite") from exc

    n_steps = int(round(t_end / dt))
    times = dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, ops.n))
    states[0] = u
    for k in range(1, n_steps + 1):
        u = cho_solve(c, rhs @ u)
        states[k] = u
    return Trajectory(ops, times, states, stepper, dt)
