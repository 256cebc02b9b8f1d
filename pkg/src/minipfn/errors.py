"""Exception hierarchy for minipfn.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map them onto stable exit codes.
"""


class MiniPfnError(Exception):
    """Base class for all minipfn errors."""


class ConfigError(MiniPfnError):
    """Malformed or inconsistent configuration."""


class DataError(MiniPfnError):
    """Dataset-level problem (ingestion, schema, dimensions)."""


class MalformedRowError(DataError):
    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(f"malformed row at line {line}" + (f": {message}" if message else ""))


class NonNumericCellError(DataError):
    def __init__(self, line: int, column: str, value: str):
        self.line = line
        self.column = column
        super().__init__(f"non-numeric cell at line {line}, column {column!r}: {value!r}")


class TooFewColumnsError(DataError):
    pass


class AllValuesEqualError(MiniPfnError):
    """Cannot build a target support from constant values."""


class NonFiniteTargetError(MiniPfnError):
    pass


class ZeroProbabilityError(MiniPfnError):
    """Predicted probability is zero on a bin that carries target mass."""


class FeatureCountExceedsMaxError(MiniPfnError):
    pass


class FeatureDimensionMismatchError(DataError):
    pass


class NonFiniteGradientError(MiniPfnError):
    """Optimizer refused a step because a gradient was not finite."""


class DivergenceError(MiniPfnError):
    """Training loss became non-finite; carries the partial loss curve."""

    def __init__(self, message: str, loss_curve=None):
        super().__init__(message)
        self.loss_curve = list(loss_curve) if loss_curve is not None else []


class ZeroVarianceTaskError(MiniPfnError):
    pass


class EmptyBatchError(MiniPfnError):
    pass


class ZeroTrueValueError(MiniPfnError):
    pass


class ZeroPredictedValueError(MiniPfnError):
    pass


class ZeroTargetVarianceError(MiniPfnError):
    pass


class ZeroBaselineError(MiniPfnError):
    pass


class DegenerateColumnError(MiniPfnError):
    pass


class CheckpointError(MiniPfnError):
    """Unreadable, unversioned, or shape-inconsistent checkpoint."""


class NoResultsError(MiniPfnError):
    """Report requested but no benchmark outputs were found."""
