"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its admissible range (e.g. p < 1, gamma <= 0)."""


class DomainError(ValueError):
    """A requested interval or window is not covered by the supplied path."""


class PreconditionError(ValueError):
    """A structural precondition fails (non-Hurwitz matrix, unbounded g, ...)."""


class NumericError(RuntimeError):
    """Numerical failure (blow-up, non-PSD embedding, non-convergent sweep)."""

    def __init__(self, message, blow_up_time=None):
        super().__init__(message)
        self.blow_up_time = blow_up_time


class IntegrityError(RuntimeError):
    """An artifact fails its manifest checksum or schema check."""
