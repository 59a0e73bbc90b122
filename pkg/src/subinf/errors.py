"""Exception types shared across the package."""


class SubinfError(Exception):
    """Base class for errors raised by this package."""


class UnsupportedGeometryError(SubinfError):
    """A group operation was requested on a geometry without a group law."""


class DomainMismatchError(SubinfError):
    """Two fields or domains that must share a lattice do not."""


class IncompleteFieldError(SubinfError):
    """A field is missing values (NaN or wrong shape) on non-exterior nodes."""


class ConnectivityError(SubinfError):
    """A horizontal graph left part of the lattice unreachable."""


class ConfigError(SubinfError):
    """A problem configuration failed to parse or validate."""


class ParameterError(SubinfError, ValueError):
    """An argument is outside its documented range."""
