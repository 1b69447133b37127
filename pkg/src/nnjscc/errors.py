"""Exception hierarchy shared by every module."""


class NNJSCCError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NNJSCCError, ValueError):
    """Invalid parameters, schemas, or combinations of settings."""


class DomainError(NNJSCCError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class NumericalError(NNJSCCError, ArithmeticError):
    """A series, root-finder or optimizer failed to converge."""


class ResourceError(NNJSCCError, MemoryError):
    """A configured resource budget (e.g. total codewords) would be exceeded."""
