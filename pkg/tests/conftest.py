import numpy as np
import pytest

from fracmix import (DomainPartition, GradingSpec, KernelParams, QuadSpec,
                     assemble_stiffness, build_mesh)


def default_partition(s: float) -> DomainPartition:
    return DomainPartition(omega=[(-1, 1)],
                           sigma1=[(-np.inf, -1), (2, np.inf)],
                           sigma2=[(1, 2)], s=s)


def symmetric_partition(s: float) -> DomainPartition:
    return DomainPartition(omega=[(-1, 1)],
                           sigma1=[(-np.inf, -2), (2, np.inf)],
                           sigma2=[(-2, -1), (1, 2)], s=s)


@pytest.fixture(scope="session")
def ops_small():
    """One small assembled operator set per fractional order."""
    out = {}
    for s in (0.25, 0.5, 0.75):
        p = default_partition(s)
        m = build_mesh(p, 24, 8)
        out[s] = assemble_stiffness(m, KernelParams(s))
    return out


@pytest.fixture(scope="session")
def sweep_mid():
    """Three-mesh sweep at s=0.5 used by several certificate tests."""
    p = default_partition(0.5)
    sweep = []
    for n in (32, 48, 64):
        m = build_mesh(p, n, max(8, n // 4))
        sweep.append(assemble_stiffness(m, KernelParams(0.5)))
    return sweep
