"""Geometric configuration and meshing.

The real line is partitioned into an open bounded domain ``omega``, a
Dirichlet exterior region ``sigma1`` (where functions are pinned to the
boundary datum, zero by default) and a reflecting exterior region
``sigma2`` (where the nonlocal flux vanishes).  Only ``omega`` and
``sigma2`` are meshed; ``sigma1`` is handled analytically everywhere.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import (
    ConfigError,
    ConsistencyError,
    CoverageError,
    DomainError,
    MeasureError,
    OverlapError,
    UnboundedSigma2Error,
)

_TOL = 1e-12

OMEGA = 0
SIGMA2 = 1


class DofClass(IntEnum):
    INTERIOR = 0      # basis function has mass in omega
    NEUMANN_EXT = 1   # basis function supported in sigma2 only
    ELIMINATED = 2    # node on the closure of sigma1, pinned to the datum


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); endpoints may be +-inf for sigma1 pieces."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"interval requires lo < hi, got ({self.lo}, {self.hi})")

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.lo) and np.isfinite(self.hi)

    @property
    def measure(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, tol: float = _TOL) -> bool:
        return self.lo - tol <= x <= self.hi + tol


def _as_intervals(items) -> tuple[Interval, ...]:
    out = []
    for it in items:
        out.append(it if isinstance(it, Interval) else Interval(*it))
    return tuple(out)


@dataclass(frozen=True)
class DomainPartition:
    """Validated triple (omega, sigma1, sigma2) plus the fractional order."""

    omega: tuple[Interval, ...]
    sigma1: tuple[Interval, ...]
    sigma2: tuple[Interval, ...]
    s: float
    dim: int = 1

    def __init__(self, omega, sigma1, sigma2, s, dim=1):
        object.__setattr__(self, "omega", _as_intervals(omega))
        object.__setattr__(self, "sigma1", _as_intervals(sigma1))
        object.__setattr__(self, "sigma2", _as_intervals(sigma2))
        object.__setattr__(self, "s", float(s))
        object.__setattr__(self, "dim", int(dim))

    @property
    def omega_endpoints(self) -> np.ndarray:
        """All finite endpoints of omega components (the topological boundary)."""
        return np.array(sorted(e for iv in self.omega for e in (iv.lo, iv.hi)))

    def in_closure_omega(self, x: float, tol: float = _TOL) -> bool:
        return any(iv.contains(x, tol) for iv in self.omega)

    def in_closure_sigma1(self, x: float, tol: float = _TOL) -> bool:
        return any(iv.contains(x, tol) for iv in self.sigma1)

    def in_closure_sigma2(self, x: float, tol: float = _TOL) -> bool:
        return any(iv.contains(x, tol) for iv in self.sigma2)

    def describe(self) -> str:
        def fmt(ivs):
            return ",".join(f"{iv.lo:.17g}:{iv.hi:.17g}" for iv in ivs)

        return (f"omega=[{fmt(self.omega)}] sigma1=[{fmt(self.sigma1)}] "
                f"sigma2=[{fmt(self.sigma2)}] s={self.s:.17g}")


def validate_partition(p: DomainPartition) -> DomainPartition:
    """Check the covering conditions and return ``p`` unchanged.

    Raises OverlapError, CoverageError, MeasureError or
    UnboundedSigma2Error when one of the structural invariants fails.
    """
    if not 0.0 < p.s < 1.0:
        raise DomainError(f"fractional order must lie in (0,1), got s={p.s}")
    if p.dim != 1:
        raise DomainError("only dim=1 is supported")
    if not p.omega:
        raise MeasureError("omega is empty")
    for iv in p.omega:
        if not iv.bounded:
            raise MeasureError(f"omega component ({iv.lo},{iv.hi}) must be bounded")
    for iv in p.sigma2:
        if not iv.bounded:
            raise UnboundedSigma2Error(
                f"sigma2 component ({iv.lo},{iv.hi}) is unbounded (v1 restriction)")
    if not p.sigma1 or sum(iv.measure for iv in p.sigma1) <= 0:
        raise MeasureError("sigma1 must have positive measure")
    if not p.sigma2 or sum(iv.measure for iv in p.sigma2) <= 0:
        raise MeasureError("sigma2 must have positive measure")

    tagged = ([(iv, "omega") for iv in p.omega]
              + [(iv, "sigma1") for iv in p.sigma1]
              + [(iv, "sigma2") for iv in p.sigma2])
    tagged.sort(key=lambda t: (t[0].lo, t[0].hi))

    # pairwise-disjoint interiors
    for (a, ta), (b, tb) in zip(tagged, tagged[1:]):
        if b.lo < a.hi - _TOL:
            raise OverlapError(
                f"{ta} ({a.lo},{a.hi}) overlaps {tb} ({b.lo},{b.hi}) "
                f"on ({b.lo},{min(a.hi, b.hi)})")

    # closures must tile the whole line
    lo0 = tagged[0][0].lo
    if np.isfinite(lo0):
        raise CoverageError(f"(-inf,{lo0}) is not covered by any region")
    cursor = tagged[0][0].hi
    for iv, tag in tagged[1:]:
        if iv.lo > cursor + _TOL:
            raise CoverageError(f"({cursor},{iv.lo}) is not covered by any region")
        cursor = max(cursor, iv.hi)
    if np.isfinite(cursor):
        raise CoverageError(f"({cursor},inf) is not covered by any region")
    return p


@dataclass(frozen=True)
class GradingSpec:
    """Element-size grading toward selected omega endpoints.

    ``kind`` is "uniform" or "geometric".  ``ratio`` in (0,1] is the factor
    by which element widths shrink toward a target endpoint.  ``ends``
    selects targets: "auto" grades toward omega endpoints adjacent to
    sigma1 (where solutions vanish like dist^s), "both" toward every
    omega endpoint, "none" disables targets.
    """

    kind: str = "uniform"
    ratio: float = 0.85
    ends: str = "auto"

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric"):
            raise ConfigError(f"unknown grading kind {self.kind!r}")
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"grading ratio must be in (0,1], got {self.ratio}")
        if self.ends not in ("auto", "both", "none", "left", "right"):
            raise ConfigError(f"unknown grading target selector {self.ends!r}")


def _geometric_widths(length: float, n: int, ratio: float) -> np.ndarray:
    """n element widths on [0,length], smallest first, consecutive ratio 1/ratio.

    The taper depth is capped so the smallest element stays a sane fraction
    of the segment; beyond the cap the widths continue uniformly.
    """
    if ratio == 1.0 or n == 1:
        return np.full(n, length / n)
    depth = min(n - 1, int(np.ceil(np.log(1e-6) / np.log(ratio))))
    w = np.concatenate([ratio ** np.arange(depth, 0, -1), np.ones(n - depth)])
    return w * (length / w.sum())


def _segment_nodes(lo: float, hi: float, n: int, grade_lo: bool, grade_hi: bool,
                   grading: GradingSpec) -> np.ndarray:
    length = hi - lo
    if grading.kind == "uniform" or not (grade_lo or grade_hi):
        return np.linspace(lo, hi, n + 1)
    if grade_lo and grade_hi:
        n_left = n // 2
        n_right = n - n_left
        mid = 0.5 * (lo + hi)
        left = _segment_nodes(lo, mid, n_left, True, False, grading) if n_left else np.array([lo])
        right = _segment_nodes(mid, hi, n_right, False, True, grading)
        return np.concatenate([left[:-1], right])
    widths = _geometric_widths(length, n, grading.ratio)
    if grade_lo:
        nodes = lo + np.concatenate([[0.0], np.cumsum(widths)])
    else:
        nodes = hi - np.concatenate([[0.0], np.cumsum(widths)])[::-1]
    nodes[0], nodes[-1] = lo, hi  # pin endpoints against cumsum roundoff
    return nodes


@dataclass(frozen=True)
class Mesh:
    """Piecewise-linear mesh over omega and sigma2 with DoF classification."""

    partition: DomainPartition
    nodes: np.ndarray                  # sorted coordinates
    elements: np.ndarray               # (n_el, 2) node indices
    el_region: np.ndarray              # OMEGA or SIGMA2 per element
    dof_class: np.ndarray              # DofClass per node
    grading: GradingSpec
    active: np.ndarray = field(init=False)      # node indices of unknowns
    active_map: np.ndarray = field(init=False)  # node -> active index or -1

    def __post_init__(self):
        for arr in ("nodes", "elements", "el_region", "dof_class"):
            getattr(self, arr).setflags(write=False)
        active = np.flatnonzero(self.dof_class != DofClass.ELIMINATED)
        amap = np.full(len(self.nodes), -1, dtype=int)
        amap[active] = np.arange(len(active))
        for name, val in (("active", active), ("active_map", amap)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_active(self) -> int:
        return len(self.active)

    @property
    def element_lengths(self) -> np.ndarray:
        return self.nodes[self.elements[:, 1]] - self.nodes[self.elements[:, 0]]

    @property
    def interior(self) -> np.ndarray:
        """Active indices of mass-carrying DoFs (basis touches omega)."""
        return np.flatnonzero(self.dof_class[self.active] == DofClass.INTERIOR)

    @property
    def neumann_ext(self) -> np.ndarray:
        """Active indices of DoFs supported in sigma2 only."""
        return np.flatnonzero(self.dof_class[self.active] == DofClass.NEUMANN_EXT)

    def strict_interior(self) -> np.ndarray:
        """Active indices of nodes strictly inside omega (off the boundary)."""
        keep = []
        endpoints = self.partition.omega_endpoints
        for a, node in enumerate(self.active):
            x = self.nodes[node]
            if self.dof_class[node] != DofClass.INTERIOR:
                continue
            if np.min(np.abs(endpoints - x)) < _TOL:
                continue
            keep.append(a)
        return np.asarray(keep, dtype=int)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.el_region.tobytes())
        h.update(self.partition.describe().encode())
        return h.hexdigest()[:16]


def build_mesh(p: DomainPartition, n_omega: int, n_sigma2: int,
               grading: GradingSpec | None = None) -> Mesh:
    """Mesh omega and sigma2 with the requested element counts.

    Counts are split across components proportionally to length (at least
    one element each).  Every component endpoint becomes a node.
    """
    validate_partition(p)
    grading = grading or GradingSpec()
    if n_omega < 4:
        raise ConfigError(f"n_omega must be >= 4, got {n_omega}")
    if n_sigma2 < 2:
        raise ConfigError(f"n_sigma2 must be >= 2, got {n_sigma2}")

    def split_counts(components, total):
        lengths = np.array([iv.measure for iv in components])
        raw = np.maximum(1, np.round(total * lengths / lengths.sum()).astype(int))
        # adjust to hit the exact total
        while raw.sum() > total:
            raw[np.argmax(raw)] -= 1
        while raw.sum() < total:
            raw[np.argmin(raw)] += 1
        return raw

    segments = []  # (nodes, region)
    for iv, n in zip(p.omega, split_counts(p.omega, n_omega)):
        if grading.ends == "auto":
            g_lo = p.in_closure_sigma1(iv.lo)
            g_hi = p.in_closure_sigma1(iv.hi)
        elif grading.ends == "both":
            g_lo = g_hi = True
        elif grading.ends == "left":
            g_lo, g_hi = True, False
        elif grading.ends == "right":
            g_lo, g_hi = False, True
        else:
            g_lo = g_hi = False
        segments.append((_segment_nodes(iv.lo, iv.hi, int(n), g_lo, g_hi, grading), OMEGA))
    for iv, n in zip(p.sigma2, split_counts(p.sigma2, n_sigma2)):
        segments.append((np.linspace(iv.lo, iv.hi, int(n) + 1), SIGMA2))

    all_nodes = np.unique(np.concatenate([seg for seg, _ in segments]))
    idx_of = {x: i for i, x in enumerate(all_nodes)}
    elements, regions = [], []
    for seg, region in segments:
        for a, b in zip(seg[:-1], seg[1:]):
            elements.append((idx_of[a], idx_of[b]))
            regions.append(region)
    elements = np.asarray(elements, dtype=int)
    regions = np.asarray(regions, dtype=int)
    order = np.argsort(all_nodes[elements[:, 0]])
    elements, regions = elements[order], regions[order]

    dof = np.empty(len(all_nodes), dtype=int)
    for i, x in enumerate(all_nodes):
        if p.in_closure_sigma1(x):
            dof[i] = DofClass.ELIMINATED
        elif p.in_closure_omega(x):
            dof[i] = DofClass.INTERIOR
        else:
            dof[i] = DofClass.NEUMANN_EXT

    mesh = Mesh(p, all_nodes, elements, regions, dof, grading)
    if np.any(mesh.element_lengths <= 0):
        raise ConsistencyError("mesh produced a degenerate element")
    covered = mesh.element_lengths.sum()
    target = sum(iv.measure for iv in p.omega) + sum(iv.measure for iv in p.sigma2)
    if abs(covered - target) > 1e-12 * max(1.0, abs(target)):
        raise ConsistencyError(f"mesh covers {covered}, expected {target}")
    return mesh


def boundary_distance(m: Mesh, x: float) -> float:
    """Distance from x to the boundary of omega; x must lie in its closure."""
    if not m.partition.in_closure_omega(x):
        raise DomainError(f"x={x} is not in the closure of omega")
    return float(np.min(np.abs(m.partition.omega_endpoints - x)))
