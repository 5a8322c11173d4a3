"""Exception types shared across the package."""

from __future__ import annotations


class HwnasError(Exception):
    """Base class for all package errors."""


class UsageError(HwnasError):
    """Invalid command-line invocation (maps to exit code 2)."""


class DegenerateGeometryError(HwnasError):
    """Kernel cannot cover the (padded) input feature map."""


class LengthMismatchError(HwnasError):
    """Architecture length differs from the search space's layer count."""


class IndexOutOfRangeError(HwnasError):
    """Architecture selects a candidate index a layer does not have."""

    def __init__(self, layer: int, index: int, n_candidates: int):
        self.layer = layer
        self.index = index
        self.n_candidates = n_candidates
        super().__init__(
            f"layer {layer}: candidate index {index} out of range "
            f"(layer has {n_candidates} candidates)"
        )


class ParseError(HwnasError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateKeyError(HwnasError):
    """A (layer, operator) pair appears more than once in a latency file."""


class NonPositiveLatencyError(HwnasError):
    """Latency values must be strictly positive and finite."""


class MissingLatencyError(HwnasError):
    """A required (layer, operator) latency entry is absent."""

    def __init__(self, layer: int, operator: str):
        self.layer = layer
        self.operator = operator
        super().__init__(f"no latency entry for layer {layer}, operator {operator!r}")


class SingularSystemError(HwnasError):
    """Regression normal equations are singular beyond jitter repair."""


class LayoutMismatchError(HwnasError):
    """Predictor was fitted on a different search-space layout."""


class EmptyDatasetError(HwnasError):
    """A metric was requested over an empty dataset."""


class InfeasibleConstraintError(HwnasError):
    """No architecture satisfying the latency constraint was found."""


class UnpreparedEvaluatorError(HwnasError):
    """evaluate() called before prepare()."""


class SpaceTooLargeError(HwnasError):
    """Exhaustive enumeration refused for spaces above the guard size."""


class EvaluatorFailureError(HwnasError):
    """The accuracy evaluator raised; a partial report may be attached."""

    def __init__(self, message: str, partial_report=None):
        self.partial_report = partial_report
        super().__init__(message)
