"""Exception types shared across the package.

Validation failures (bad dimensions, malformed manifests, degenerate
inputs) all derive from :class:`ValidationError`; the CLI maps those to
exit code 2 and everything else to exit code 1.
"""


class SketchferError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SketchferError, ValueError):
    """Caller-supplied input violates a documented precondition."""


class DimensionError(ValidationError):
    """Shapes or sizes are inconsistent (mismatched rows/columns, bad bucket counts)."""


class DegenerateInputError(ValidationError):
    """Input is formally valid but numerically empty (all-zero features, zero kernel)."""


class ManifestError(ValidationError):
    """A dataset manifest or one of its referenced array files is invalid."""
