"""Exception hierarchy shared across the package."""


class MsvError(Exception):
    """Base class for all library errors."""


class ParameterError(MsvError):
    """A caller-supplied parameter is out of its valid range."""


class ShapeMismatchError(MsvError):
    """Input and baseline (or model) shapes disagree."""


class SiteIndexError(MsvError):
    """A view references a site outside the input's index range."""


class InputError(MsvError):
    """An input file is missing, unreadable, or malformed."""


class BackendError(MsvError):
    """A classifier backend failed to load or run."""


class GreedyRunError(MsvError):
    """A greedy search hit its recursion cap; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class OracleLimitError(MsvError):
    """Exhaustive enumeration was refused because the instance is too large."""
