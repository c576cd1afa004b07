"""Exception hierarchy shared by all modules."""


class QuiverLearnError(Exception):
    """Base class for every error raised by this package."""


class CycleError(QuiverLearnError):
    """The quiver contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " -> ".join(str(v) for v in self.cycle)
        super().__init__(f"quiver has a directed cycle: {path}")


class UnknownVertex(QuiverLearnError, KeyError):
    pass


class EmptyModuli(QuiverLearnError):
    pass


class PathLimitExceeded(QuiverLearnError):
    pass


class SingularGauge(QuiverLearnError):
    pass


class SingularBasisPart(QuiverLearnError):
    """The point lies outside the affine chart where every basis part is invertible."""


class DomainSamplingFailed(QuiverLearnError):
    pass


class SingularForm(QuiverLearnError):
    def __init__(self, message, vertex=None):
        self.vertex = vertex
        super().__init__(message)


class OutOfDomain(QuiverLearnError):
    def __init__(self, message, vertex=None):
        self.vertex = vertex
        super().__init__(message)


class NonPositive(QuiverLearnError):
    pass


class NotPositiveDefinite(QuiverLearnError):
    pass


class AlgorithmParseError(QuiverLearnError):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class AlgorithmTypeError(QuiverLearnError, TypeError):
    pass


class UnknownSymbol(QuiverLearnError):
    pass


class NonDifferentiable(QuiverLearnError):
    pass


class ConfigError(QuiverLearnError):
    pass
