import typing

if typing.TYPE_CHECKING:
    from .minimizer import FeasibleRegionSpec


class SsaLabError(Exception):
    """
    Base class for every error raised by ssalab
    """


class InvalidStateError(SsaLabError):
    """
    Raised when a matrix is not a valid density matrix (Hermiticity, trace,
    negative eigenvalues) or a density-matrix document is malformed
    """


class DimensionError(SsaLabError):
    """
    Raised when dimensions, vector lengths, block sizes or keep-sets do not
    fit together
    """


class ZeroPatternError(SsaLabError):
    """
    Raised when a support pattern violates the zero-count condition or
    leaves an empty feasible region
    """


class SamplerError(SsaLabError):
    """
    Raised when the feasible sampler spends its retry budget
    """

    def __init__(
        self, msg: str, spec: typing.Optional["FeasibleRegionSpec"] = None
    ) -> None:
        SsaLabError.__init__(self, msg)
        self.spec = spec


class PerturbationError(SsaLabError):
    """
    Raised when a mass transfer would break positivity or ordering
    """


class GeneratorError(SsaLabError):
    """
    Raised for an invalid generator specification
    """


class UsageError(SsaLabError):
    """
    Raised for command line arguments that parse but do not fit together
    """
