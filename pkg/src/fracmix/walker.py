"""Jump-chain realization of the mixed boundary problem.

A walker started in omega jumps between mesh-node cells with probability
given by the exact kernel mass of each cell, is absorbed on sigma1 (and
on the pinned datum nodes) collecting the payoff there, and is reflected
from sigma2 cells straight back into omega with the kernel-normalized
law.  Expected payoffs solve a small linear system exactly, which gives
an oracle for the Galerkin solver that shares no quadrature with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import BoundaryDatum
from .domain import DofClass, Mesh, OMEGA
from .errors import ConfigError, DomainError, NonterminationError
from .kernel import KernelParams, region_weight

Array = np.ndarray

STEP_CAP = 10 ** 6


def _node_cells(mesh: Mesh):
    """Voronoi-style cell of every node, clipped to the meshed components."""
    nodes = mesh.nodes
    lows = np.empty(len(nodes))
    highs = np.empty(len(nodes))
    lows[:] = nodes
    highs[:] = nodes
    for e, (i, j) in enumerate(mesh.elements):
        mid = 0.5 * (nodes[i] + nodes[j])
        highs[i] = max(highs[i], mid)
        lows[j] = min(lows[j], mid)
    return lows, highs


def _omega_clip(mesh: Mesh, lows, highs):
    """Cells intersected with omega (for reflection targets)."""
    out_lo = lows.copy()
    out_hi = highs.copy()
    keep = np.zeros(len(lows), dtype=bool)
    for iv in mesh.partition.omega:
        inside = (highs > iv.lo) & (lows < iv.hi)
        out_lo[inside] = np.maximum(out_lo[inside], iv.lo)
        out_hi[inside] = np.minimum(out_hi[inside], iv.hi)
        keep |= inside
    return keep, out_lo, out_hi


def _cell_masses(x: float, lo: Array, hi: Array, s: float) -> Array:
    """Exact kernel mass of each cell (lo,hi) seen from x outside them all."""
    left = x <= lo
    d_near = np.where(left, lo - x, x - hi)
    d_far = np.where(left, hi - x, x - lo)
    with np.errstate(divide="ignore"):
        a = np.where(np.isinf(d_near), 0.0, d_near ** (-2 * s))
        b = np.where(np.isinf(d_far), 0.0, d_far ** (-2 * s))
    return (a - b) / (2 * s)


@dataclass(frozen=True)
class JumpChain:
    """Row-stochastic chain over mesh-node cells plus sigma1 absorption bins.

    Targets are indexed as [mesh nodes..., bins...]; rows exist for the
    transient nodes (``row_nodes``).  ``bin_reps`` holds the payoff
    evaluation point of each bin (nan marks a constant far-field tail).
    """

    mesh: Mesh
    kernel: KernelParams
    row_nodes: Array          # node index per row
    P: Array                  # (n_rows, n_targets) transition probabilities
    bin_reps: Array           # (n_bins,) representative coordinates
    bin_is_tail: Array        # (n_bins,) bool
    sigma1_window: float

    @property
    def n_nodes(self) -> int:
        return len(self.mesh.nodes)

    @property
    def n_bins(self) -> int:
        return len(self.bin_reps)

    def row_of_node(self) -> dict:
        return {n: r for r, n in enumerate(self.row_nodes)}

    def absorbing_payoffs(self, h: BoundaryDatum) -> Array:
        """Payoff for every target index (transient targets get 0)."""
        pay = np.zeros(self.n_nodes + self.n_bins)
        elim = np.flatnonzero(self.mesh.active_map < 0)
        pay[elim] = h(self.mesh.nodes[elim])
        for b in range(self.n_bins):
            if self.bin_is_tail[b]:
                pay[self.n_nodes + b] = h.far_const
            else:
                pay[self.n_nodes + b] = float(h(np.array([self.bin_reps[b]]))[0])
        return pay

    def transient_mask(self) -> Array:
        mask = np.zeros(self.n_nodes + self.n_bins, dtype=bool)
        mask[self.row_nodes] = True
        return mask


def build_chain(m: Mesh, k: KernelParams, sigma1_window: float = 3.0,
                n_bins: int = 24) -> JumpChain:
    """Assemble the chain from exact kernel cell masses.

    ``sigma1_window`` is how far into each sigma1 component (from its
    nearest finite endpoint) the payoff may vary; it is binned into
    ``n_bins`` equal cells per component, with one aggregated tail bin
    carrying the closed-form remaining mass.
    """
    if n_bins < 1:
        raise ConfigError("n_bins must be positive")
    part = m.partition
    s = part.s
    lows, highs = _node_cells(m)
    keep_om, olo, ohi = _omega_clip(m, lows, highs)

    # sigma1 bins: equal widths inside the window, tails aggregated
    bin_edges = []
    for iv in part.sigma1:
        if np.isinf(iv.lo) and np.isinf(iv.hi):
            raise ConfigError("sigma1 component with two infinite endpoints")
        if np.isfinite(iv.lo) and np.isfinite(iv.hi):
            w_hi = min(iv.hi, iv.lo + sigma1_window)
            edges = np.linspace(iv.lo, w_hi, n_bins + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                bin_edges.append((a, b, False))
            if w_hi < iv.hi:
                bin_edges.append((w_hi, iv.hi, True))
        elif np.isfinite(iv.lo):      # (lo, +inf)
            w_hi = iv.lo + sigma1_window
            edges = np.linspace(iv.lo, w_hi, n_bins + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                bin_edges.append((a, b, False))
            bin_edges.append((w_hi, np.inf, True))
        else:                          # (-inf, hi)
            w_lo = iv.hi - sigma1_window
            bin_edges.append((-np.inf, w_lo, True))
            edges = np.linspace(w_lo, iv.hi, n_bins + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                bin_edges.append((a, b, False))
    bin_reps = np.array([0.5 * (a + b) if not tail else np.nan
                         for a, b, tail in bin_edges])
    bin_is_tail = np.array([tail for _, _, tail in bin_edges])

    transient = np.flatnonzero(m.dof_class != DofClass.ELIMINATED)
    is_omega_row = np.array([m.partition.in_closure_omega(m.nodes[n])
                             for n in transient])
    n_nodes = len(m.nodes)
    n_targets = n_nodes + len(bin_edges)
    P = np.zeros((len(transient), n_targets))

    bin_lo = np.array([a for a, _, _ in bin_edges])
    bin_hi = np.array([b for _, b, _ in bin_edges])
    for r, n_idx in enumerate(transient):
        x = m.nodes[n_idx]
        mass = np.zeros(n_targets)
        if is_omega_row[r]:
            # full jump row: every node cell except its own, plus sigma1 bins
            mass[:n_nodes] = _cell_masses(x, lows, highs, s)
            mass[n_idx] = 0.0
            mass[n_nodes:] = _cell_masses(x, bin_lo, bin_hi, s)
        else:
            # reflection row: omega-clipped cells only
            keep = keep_om.copy()
            keep[n_idx] = False
            mass[:n_nodes][keep] = _cell_masses(x, olo[keep], ohi[keep], s)
        total = mass.sum()
        if total <= 0:
            raise ConfigError(f"empty transition row at node x={x}")
        P[r] = mass / total
    return JumpChain(m, k, transient, P, bin_reps, bin_is_tail, sigma1_window)


def chain_payoff_solve(c: JumpChain, h: BoundaryDatum) -> Array:
    """Expected payoffs of all transient states from the dense chain equations."""
    pay = c.absorbing_payoffs(h)
    trans = c.transient_mask()
    n_rows = len(c.row_nodes)
    P_tt = np.empty((n_rows, n_rows))
    for j, n in enumerate(c.row_nodes):
        P_tt[:, j] = c.P[:, n]
    rhs = c.P[:, ~trans] @ pay[~trans]
    return np.linalg.solve(np.eye(n_rows) - P_tt, rhs)


@dataclass(frozen=True)
class WalkEstimate:
    """Monte Carlo payoff estimate with its sampling error."""

    start_node: int
    estimate: float
    stderr: float
    n_walkers: int
    seed: int


def _alias_tables(P: Array):
    """Vose alias tables per row for O(1) categorical sampling."""
    n_rows, K = P.shape
    prob = np.zeros((n_rows, K))
    alias = np.zeros((n_rows, K), dtype=np.int64)
    for r in range(n_rows):
        scaled = P[r] * K
        small = [j for j in range(K) if scaled[j] < 1.0]
        large = [j for j in range(K) if scaled[j] >= 1.0]
        sc = scaled.copy()
        while small and large:
            s_j = small.pop()
            l_j = large.pop()
            prob[r, s_j] = sc[s_j]
            alias[r, s_j] = l_j
            sc[l_j] = sc[l_j] - (1.0 - sc[s_j])
            (small if sc[l_j] < 1.0 else large).append(l_j)
        for j in large + small:
            prob[r, j] = 1.0
            alias[r, j] = j
    return prob, alias


def estimate_payoff(c: JumpChain, x0: int, h: BoundaryDatum,
                    n_walkers: int, seed: int,
                    batch: int = 200_000) -> WalkEstimate:
    """Average absorbed payoff over independent walks started at node x0.

    Deterministic given (chain, seed, n_walkers).  Raises
    NonterminationError if any walk exceeds the step cap, which with
    positive absorption mass from every omega cell signals a broken chain.
    """
    node_to_row = c.row_of_node()
    if x0 not in node_to_row or not c.mesh.partition.in_closure_omega(c.mesh.nodes[x0]):
        raise DomainError(f"start node {x0} is not an omega node")
    pay = c.absorbing_payoffs(h)
    trans = c.transient_mask()
    prob, alias = _alias_tables(c.P)
    K = c.P.shape[1]
    row_lookup = -np.ones(c.n_nodes + c.n_bins, dtype=np.int64)
    for n, r in node_to_row.items():
        row_lookup[n] = r

    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_walkers:
        nb = min(batch, n_walkers - done)
        state = np.full(nb, x0, dtype=np.int64)
        out = np.empty(nb)
        alive = np.arange(nb)
        steps = 0
        while len(alive):
            steps += 1
            if steps > STEP_CAP:
                raise NonterminationError("walk exceeded the step cap")
            rows = row_lookup[state[alive]]
            j = rng.integers(0, K, size=len(alive))
            u = rng.random(len(alive))
            nxt = np.where(u < prob[rows, j], j, alias[rows, j])
            state[alive] = nxt
            absorbed = ~trans[nxt]
            hit = alive[absorbed]
            out[hit] = pay[state[hit]]
            alive = alive[~absorbed]
        total += out.sum()
        total_sq += (out ** 2).sum()
        done += nb
    mean = total / n_walkers
    var = max(0.0, total_sq / n_walkers - mean ** 2)
    stderr = np.sqrt(var / n_walkers)
    return WalkEstimate(x0, float(mean), float(stderr), n_walkers, seed)
