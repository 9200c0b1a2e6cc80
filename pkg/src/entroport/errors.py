"""Exception hierarchy shared by all entroport modules."""


class EntroportError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInput(EntroportError):
    """Input file or stream violates the documented format."""


class InvalidConfig(MalformedInput):
    """Run configuration is structurally or semantically invalid."""


class InsufficientData(EntroportError):
    """Too few observations for the requested computation."""


class DegenerateSample(EntroportError):
    """Sample has zero-width support (all values identical)."""


class DomainError(EntroportError):
    """Argument outside the mathematical domain of the function."""


class NotPositiveDefinite(EntroportError):
    """Matrix failed a symmetric positive-definite factorization."""


class OutOfSupport(EntroportError):
    """Observation falls outside the fitted density's support."""


class DegenerateObjective(EntroportError):
    """Objective-value column cannot be rescaled (zero mean)."""


class SingularMatrix(EntroportError):
    """Linear system matrix is singular."""


class IllConditioned(EntroportError):
    """Condition number estimate exceeds the configured bound."""


class InfeasibleConstraints(EntroportError):
    """Budget and expected-return constraints cannot both be met."""


class ZeroRisk(EntroportError):
    """Risk denominator is numerically zero."""


class ZeroEntropyQuadratic(EntroportError):
    """Entropy quadratic form of the market portfolio vanishes."""


class NoConvergence(EntroportError):
    """Iterative solver exhausted its iteration budget.

    Carries the iteration trace for diagnosis when available.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
