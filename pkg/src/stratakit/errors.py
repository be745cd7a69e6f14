"""Exception taxonomy shared across the package.

The CLI maps these onto its stable exit codes, so library code should
raise the most specific class that applies.
"""


class StratakitError(Exception):
    """Base class for all package errors."""


class InputError(StratakitError, ValueError):
    """Malformed or inconsistent arguments (dimension mismatch, bad shapes, ...)."""


class DomainError(StratakitError, ValueError):
    """Mathematically undefined request (zero ray, slope of the zero vector, ...)."""


class SchemaError(StratakitError, ValueError):
    """Instance or config file violates the documented schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ResourceLimitError(StratakitError, RuntimeError):
    """A configured combinatorial bound would be exceeded."""


class UnsupportedError(StratakitError, RuntimeError):
    """Request outside the exactly-decidable regime (e.g. exact method on d_v >= 2)."""


class GenerationError(StratakitError, RuntimeError):
    """Instance generator lacks a certified building block."""


class NumericError(StratakitError, RuntimeError):
    """Hard numerical failure (NaN / overflow) in an iterative routine."""


class ClassificationError(StratakitError, RuntimeError):
    """A flow limit could not be snapped to a unique candidate index."""
