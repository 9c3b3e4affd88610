"""Exception types shared across the package."""


class IterLibError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInput(IterLibError, ValueError):
    """Input contains coincident points where distinct ones are required."""


class InvalidAnchor(IterLibError, ValueError):
    """Time vector does not start at 0."""


class InvalidParameter(IterLibError, ValueError):
    """Parameter outside its admissible range (e.g. nonpositive rate)."""


class InvalidInput(IterLibError, ValueError):
    """Malformed runtime input (non-finite time, empty sample, ...)."""


class CapacityExceeded(IterLibError, RuntimeError):
    """An enumeration or atom budget would be exceeded."""


class UnsupportedRegime(IterLibError, ValueError):
    """Parameter regime for which the requested representation does not hold."""


class NoConvergence(IterLibError, RuntimeError):
    """Iteration failed to converge within its cap."""
