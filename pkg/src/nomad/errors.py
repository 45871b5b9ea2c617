"""Exception types raised across the package."""


class NomadError(Exception):
    """Base class for all package errors."""


class SingularityError(NomadError, ArithmeticError):
    """Matrix is singular or has a non-positive determinant."""


class ConfigError(NomadError, ValueError):
    pass


class CycleError(NomadError, ValueError):
    """A weight matrix expected to be acyclic has a directed cycle."""


class NonNegativityError(NomadError, ValueError):
    pass


class DomainError(NomadError, ValueError):
    """Iterate lies outside the domain of the acyclicity function."""


class DimensionError(NomadError, ValueError):
    pass


class LineSearchStall(NomadError, RuntimeError):
    """Backtracking drove the stepsize below the floor."""


class DataError(NomadError, ValueError):
    pass


class DegenerateTruthError(NomadError, ValueError):
    pass


class SamplingError(NomadError, RuntimeError):
    pass
