"""Exception classes shared across the package.

The CLI maps each class to a distinct exit code.
"""


class RejectionError(ValueError):
    """Input violates a precondition (invalid sets, conflicting pins, bad ranges)."""


class SolverError(RuntimeError):
    """The energy minimizer did not reach its tolerance.

    The last iterate and its residual are attached for diagnosis.
    """

    def __init__(self, message, field=None, residual=None):
        super().__init__(message)
        self.field = field
        self.residual = residual


class ConsistencyError(RuntimeError):
    """An internal invariant (e.g. monotone exhaustion stages) was violated."""
