"""Exception hierarchy.

Errors are split into data problems (bad inputs, files, shapes) and numerical
problems (non-convergence, failed factorizations) so the CLI can map them to
distinct exit codes.
"""


class AugscError(Exception):
    """Base class for all package errors."""


class DataError(AugscError, ValueError):
    pass


class NumericalError(AugscError, ArithmeticError):
    pass


class NearZeroColumn(DataError):
    def __init__(self, index, norm):
        super().__init__(f"column {index} has norm {norm:.3e} (below 1e-12)")
        self.index = index
        self.norm = norm


class DegenerateGram(NumericalError):
    pass


class GeometryMismatch(DataError):
    pass


class InsufficientLabels(DataError):
    def __init__(self, cluster, available, required):
        super().__init__(
            f"cluster {cluster} has {available} labeled samples, {required} required"
        )
        self.cluster = cluster


class KTooLarge(DataError):
    pass


class SingularSystem(NumericalError):
    pass


class SvdFailure(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, residual, iterations):
        super().__init__(
            f"ADMM stopped at the iteration cap ({iterations}) with residual {residual:.3e}"
        )
        self.residual = residual
        self.iterations = iterations


class SingularPropagation(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class LengthMismatch(DataError):
    pass


class UnboundedDual(NumericalError):
    pass


class DegenerateHull(NumericalError):
    pass


class ParseError(DataError):
    pass


class NonFinite(ParseError):
    pass


class MagicMismatch(ParseError):
    pass


class Truncated(ParseError):
    pass


class UsageError(AugscError):
    pass


class ConvergenceWarning(UserWarning):
    """Emitted when an iterative solver stops at its iteration cap."""
