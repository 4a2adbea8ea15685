"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by entlab."""


class UsageError(LabError, ValueError):
    """Inputs are structurally wrong (missing layout, bad shapes, unknown names)."""


class DimensionError(UsageError):
    """Operator or state dimensions do not match."""


class DomainError(LabError, ValueError):
    """A value lies outside the mathematical domain of the operation."""


class CapacityError(LabError):
    """A Hilbert-space dimension exceeds the configured cap."""


class PathError(LabError):
    """A Hamiltonian path loses its spectral gap."""


class ParameterError(UsageError):
    """A tuning parameter lies outside its numerically stable range."""
