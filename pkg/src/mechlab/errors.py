"""Exception hierarchy shared by all modules."""


class MechlabError(Exception):
    """Base class for every error raised by mechlab."""


class DomainError(MechlabError, ValueError):
    """Argument outside the mathematical domain (e.g. a quantile at a pole)."""


class InvalidInputError(MechlabError, ValueError):
    """Malformed or inconsistent input (dimension mismatch, broken invariant)."""


class InfeasibleError(MechlabError):
    """Input violates a feasibility condition required by the operation."""


class ResourceError(MechlabError):
    """Requested computation exceeds a configured cap."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class InternalError(MechlabError, RuntimeError):
    """A construction produced a value its own derivation rules out."""
