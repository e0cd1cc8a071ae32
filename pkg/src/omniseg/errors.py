"""Exception types shared across the package."""


class OmnisegError(Exception):
    """Base class for all package errors."""


class ValidationError(OmnisegError, ValueError):
    """Input data violates a documented contract (ranges, finiteness, binarity)."""


class ShapeError(ValidationError):
    """Array shape or size mismatch."""


class RegistryError(OmnisegError, KeyError):
    """Unknown task/scale id or name."""
