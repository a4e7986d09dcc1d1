"""Exception hierarchy shared by all kpzlab modules."""


class KpzLabError(Exception):
    """Base class for library errors."""


class DomainError(KpzLabError, ValueError):
    """A coordinate or index lies outside the region where an object is defined."""


class ParameterError(KpzLabError, ValueError):
    """A numeric parameter is invalid (non-positive diffusion, bad depth, ...)."""


class ValidationError(KpzLabError, ValueError):
    """A structured value (path, ensemble, file) failed validation."""


class RefusalError(KpzLabError):
    """The request is well formed but would be infeasible or statistically meaningless."""


class UnavailableError(KpzLabError):
    """A quantity is undefined on this instance (for example, no stabilization)."""


class ResourceError(KpzLabError):
    """The requested computation exceeds the memory budget."""


class WindowNotFoundError(KpzLabError):
    """The restriction-window envelope was never dominated inside the search range."""


class NonFinitaryError(KpzLabError):
    """The initial condition fails the finitary growth test."""


class RejectionFailure(KpzLabError):
    """Rejection sampling exhausted its attempt budget."""

    def __init__(self, message: str, attempts: int, accepted: int):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_rate(self) -> float:
        """Point estimate of the acceptance probability (upper bound 1/attempts when zero)."""
        return self.accepted / self.attempts if self.attempts else 0.0
