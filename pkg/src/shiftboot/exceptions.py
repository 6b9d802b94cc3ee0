"""Exception taxonomy shared across the package.

Two broad failure families matter to callers: bad inputs (validation) and
numerical breakdowns (singular systems, non-convergence). The CLI maps them
to distinct exit codes.
"""


class DataError(ValueError):
    """Invalid input data or configuration: missing columns, non-binary
    labels, unknown ids, inconsistent shapes."""


class FitError(RuntimeError):
    """Numerical failure inside an estimator: singular penalized system,
    non-convergence, component collapse, degenerate objective."""
