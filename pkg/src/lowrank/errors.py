"""Exception hierarchy shared by the library and the CLI.

Plain ``ValueError``/``TypeError`` are used for bad arguments; the classes
here cover failure modes that callers may want to branch on (and that the
CLI maps to dedicated exit codes).
"""


class LowRankError(Exception):
    """Base class for package-specific failures."""

    code = "error"


class InfeasibleError(LowRankError):
    """A penalty or rank regime is infeasible at the given dimensions."""

    code = "infeasible-penalty"


class VarianceNotEstimableError(InfeasibleError):
    """The design has full row rank, so the residual variance estimate
    is undefined (no off-range residual)."""

    code = "variance-not-estimable"


class NumericalError(LowRankError):
    """An iterative numerical routine failed to converge."""

    code = "numerical-error"
