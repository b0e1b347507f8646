"""1D fractional Laplacian with mixed nonlocal Dirichlet/Neumann conditions.

A Galerkin solver over the natural pair domain (at least one point inside
the domain), a jump-process Monte Carlo oracle, and numerical
certificates for the associated maximum-principle inequalities.
"""

__version__ = "0.1.0"

from .domain import (DofClass, DomainPartition, GradingSpec, Interval, Mesh,
                     boundary_distance, build_mesh, validate_partition)
from .kernel import (Field, KernelParams, kernel_eval, neumann_derivative,
                     normalization_constant, pv_fractional_laplacian,
                     pv_of_profile, reflect_normalizer)
from .assembly import (BoundaryDatum, LoadVector, OperatorSet, QuadSpec,
                       assemble_load, assemble_mass, assemble_stiffness,
                       dirichlet_lift, weighted_pair_form)
from .solve import (DIRICHLET, IMPLICIT_EULER, MIXED, TRAPEZOIDAL, EigenPair,
                    Trajectory, solve_eigen, solve_elliptic, solve_parabolic,
                    solve_xi0)
from .walker import (JumpChain, WalkEstimate, build_chain, chain_payoff_solve,
                     estimate_payoff)
from .verify import (Certificate, FunctionFamily, certify_comparison,
                     certify_delta_lower_bounds, certify_eigen_comparison,
                     certify_elliptic_hopf, certify_green_identity,
                     certify_hardy, certify_linfty_ratio,
                     certify_parabolic_hopf, certify_poincare,
                     certify_weighted_sobolev, family_functions,
                     green_identity_gap, monitor_theta, parabolic_grid)
