"""Jump-process reading of the mixed problem, cross-checked three ways.

A walker jumps with the heavy-tailed kernel law, collects the datum when
it lands in the absorbing exterior, and is kicked straight back into the
domain from the reflecting part.  Expected payoffs from (i) Monte Carlo,
(ii) the dense chain equations, and (iii) the variational solver with a
boundary lift all agree.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fracmix import (BoundaryDatum, DomainPartition, KernelParams,
                     assemble_load, assemble_stiffness, build_chain,
                     build_mesh, chain_payoff_solve, dirichlet_lift,
                     estimate_payoff, solve_elliptic)
from fracmix.solve import MIXED

part = DomainPartition(omega=[(-1, 1)], sigma1=[(-np.inf, -1), (2, np.inf)],
                       sigma2=[(1, 2)], s=0.5)
mesh = build_mesh(part, 48, 16)
k = KernelParams(0.5)
chain = build_chain(mesh, k, sigma1_window=3.0, n_bins=24)
print(f"chain: {chain.P.shape[0]} transient states, {chain.n_bins} absorption bins")

# datum: pays on the left exterior, decaying with depth
h = BoundaryDatum(far_const=0.0, fn=lambda y: np.exp(-0.8 * np.abs(y + 1)) * (y < 0),
                  window=(-4.0, 5.0))

exact = chain_payoff_solve(chain, h)
starts = [int(chain.row_nodes[np.argmin(np.abs(mesh.nodes[chain.row_nodes] - x))])
          for x in (-0.6, 0.0, 0.6)]
rows = chain.row_of_node()
print(f"{'start':>8} {'monte carlo':>14} {'chain solve':>12} {'z':>6}")
for i, x0 in enumerate(starts):
    est = estimate_payoff(chain, x0, h, 100_000, seed=500 + i)
    z = (est.estimate - exact[rows[x0]]) / est.stderr
    print(f"{mesh.nodes[x0]:8.3f} {est.estimate:10.5f}+-{est.stderr:.5f} "
          f"{exact[rows[x0]]:12.5f} {z:6.2f}")

ops = assemble_stiffness(mesh, k)
F0 = assemble_load(mesh, lambda x: np.zeros_like(x), ops.quad)
Fl, boundary = dirichlet_lift(mesh, ops, h, F0)
u = solve_elliptic(MIXED, ops, Fl)

xs_om = mesh.nodes[chain.row_nodes]
plt.figure(figsize=(7, 4))
plt.plot(xs_om, exact, "o", ms=3, label="chain expected payoff")
xs = np.linspace(-1, 2, 400)
plt.plot(xs, u(xs), label="variational solve + lift")
plt.axvspan(1, 2, color="0.9")
plt.xlabel("start x"), plt.ylabel("expected payoff")
plt.legend(fontsize=8)
plt.tight_layout()
plt.savefig("demos_04_walker.png", dpi=150)
print("figure: demos_04_walker.png")
