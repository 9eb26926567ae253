"""Exception types shared across the workbench.

Every error the library raises on purpose derives from WorkbenchError so the
CLI can map failures onto its exit-code contract without chasing module
internals.
"""


class WorkbenchError(Exception):
    """Base class for all deliberate workbench errors."""


class InputShapeError(WorkbenchError, ValueError):
    """An input array or sequence has the wrong length or dtype domain."""


class InsufficientTailError(WorkbenchError, RuntimeError):
    """Too little mass beyond the fit window to estimate a tail exponent."""


class DimensionError(WorkbenchError, ValueError):
    """A chain is too large for the configured dense-matrix limit."""


class NonConvergenceError(WorkbenchError, RuntimeError):
    """Power iteration hit its cap with the residual above tolerance."""


class UnattainableError(WorkbenchError, RuntimeError):
    """No admissible operating point meets the requested target."""


class SchemaError(WorkbenchError, ValueError):
    """An interchange file carries an unknown or mismatched schema tag."""
