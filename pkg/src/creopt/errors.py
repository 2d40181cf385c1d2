"""Exception taxonomy shared by all solver modules."""


class CreoptError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CreoptError):
    """Malformed or out-of-contract argument (wrong shape, non-Hermitian, bad unit)."""


class InfeasibleError(CreoptError):
    """Threshold combination admits no covariance; carries the phase-I certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate or {}


class IllConditionedError(CreoptError):
    """A solver's working matrices degenerated past the trusted condition range."""


class UnboundedDualError(CreoptError):
    """Inner maximization is unbounded at the queried dual point (range condition broken)."""


class InternalInconsistencyError(CreoptError):
    """A structural guarantee failed at runtime; indicates a bug, not a user error."""
