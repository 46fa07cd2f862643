"""Exception hierarchy shared by all engines."""


class MultiplexError(Exception):
    """Base class for library errors."""


class NetworkValidationError(MultiplexError, ValueError):
    """Input document or network object violates the data model."""


class UnsupportedProtocolError(MultiplexError, ValueError):
    """A backend was asked to handle a protocol it does not model."""


class CapacityError(MultiplexError):
    """An exact computation would exceed its configured size gate."""


class CyclicProjectionError(MultiplexError, ValueError):
    """The Bayesian-network backend needs an acyclic projection."""
