"""Exception hierarchy shared by every module."""


class QCompositeError(Exception):
    """Base class for all library errors."""


class ParameterError(QCompositeError, ValueError):
    """Parameters violate an operation's preconditions."""


class DomainError(ParameterError):
    """The requested quantity is undefined for otherwise valid parameters."""


class CapacityError(QCompositeError):
    """Inputs exceed the declared limits of the exact arithmetic path."""
