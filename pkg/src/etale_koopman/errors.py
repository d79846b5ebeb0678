"""Exception hierarchy shared by every module."""


class KoopmanError(Exception):
    """Base class for all errors raised by :mod:`etale_koopman`."""


class InputError(KoopmanError, ValueError):
    """Malformed or inconsistent input data."""


class DomainError(KoopmanError, ValueError):
    """An operation was applied outside the set where it is defined."""


class ResourceError(KoopmanError):
    """A truncation depth, headroom or size bound is too small.

    ``required`` carries the minimal sufficient value when it is known.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class DegenerateInputError(KoopmanError, ValueError):
    """A zero-measure cylinder was reached where a positive one is needed."""


class SpecificationError(KoopmanError):
    """A user supplied action rule violates one of the groupoid-action axioms."""

    def __init__(self, axiom, message):
        super().__init__(f"{axiom}: {message}")
        self.axiom = axiom
