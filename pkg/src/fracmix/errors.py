"""Exception hierarchy shared across the package."""


class FracmixError(Exception):
    """Base class for all package errors."""


class DomainError(FracmixError):
    """A coordinate or parameter lies outside its admissible set."""


class OverlapError(FracmixError):
    """Two regions of the exterior partition have interiors that intersect."""


class CoverageError(FracmixError):
    """The exterior regions do not cover the complement of the domain."""


class MeasureError(FracmixError):
    """A region that must have positive measure is empty or degenerate."""


class UnboundedSigma2Error(FracmixError):
    """The reflecting region must be bounded in this version."""


class ConfigError(FracmixError):
    """Invalid run configuration (counts, missing keys, malformed values)."""


class SingularityError(FracmixError):
    """Kernel evaluated on the diagonal x == y."""


class QuadratureError(FracmixError):
    """Requested quadrature tolerance unreachable at the configured refinement."""


class ConsistencyError(FracmixError):
    """Mismatched mesh/kernel/operator metadata."""


class SingularMatrixError(FracmixError):
    """A factorization that should succeed did not (setup bug or lost coercivity)."""


class ConvergenceError(FracmixError):
    """An iterative solver exhausted its iteration cap."""


class StepError(FracmixError):
    """Time stepper could not factor or apply its system."""


class NonterminationError(FracmixError):
    """A random walk exceeded the step cap; the chain is broken."""


class RatioError(FracmixError):
    """A pointwise ratio was requested where the denominator vanishes."""
