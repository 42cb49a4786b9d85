"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI: validation problems exit with 2,
numerical failures with 3.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class ValidationError(PipelineError):
    """Invalid arguments or malformed input data."""


class AlignmentError(ValidationError):
    """Series or matrices that must share a span/shape do not."""


class InsufficientHistoryError(ValidationError):
    """Not enough data points for the requested window or warm-up."""


class InsufficientOverlapError(ValidationError):
    """No admissible shift leaves enough overlapping data."""


class DegenerateInputError(ValidationError):
    """Constant or otherwise degenerate input where variation is required."""


class EnsembleEmptyError(ValidationError):
    """No regularization-path model satisfies the sparsity band."""


class IngestionError(ValidationError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class NumericalError(PipelineError):
    """A numerical procedure failed beyond recoverable guards."""

    exit_code = 3


class ConvergenceError(NumericalError):
    """Iterative solver did not converge; carries the final KKT violation."""

    def __init__(self, message, kkt_violation=None):
        self.kkt_violation = kkt_violation
        if kkt_violation is not None:
            message = f"{message} (KKT violation {kkt_violation:.3e})"
        super().__init__(message)
