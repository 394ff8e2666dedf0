from collections.abc import Sequence


class HQCoherenceError(Exception):
    """
    Base class for all exceptions raised by hqcoherence.

    Parameters:
        message: The error message.
    """

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(message)


class HQCoherenceConfigurationError(HQCoherenceError):
    """
    Base class for all configuration exceptions raised by hqcoherence.

    Parameters:
        message: The error message.
    """


class InvalidParametersError(ValueError, HQCoherenceError):
    """
    Raised when a physical input violates its domain, e.g. a negative
    exchange coupling or a non-finite energy.

    Parameters:
        message: The error message.
    """

    def __init__(self, message: str) -> None:
        super().__init__(message)
        super(ValueError, self).__init__(message)


class DegenerateDistributionError(InvalidParametersError):
    """
    Raised when a density is requested for a zero-width distribution.
    Averaging collapses such a dimension to its mean instead.

    Parameters:
        name: The name of the width parameter.
    """

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(
            f"{name} must be positive to evaluate a density; "
            "a zero width is a Dirac distribution."
        )


class AnalyticFormulaError(InvalidParametersError):
    """
    Raised when the closed-form return probability is requested with a
    non-zero Zeeman gradient.
    """

    def __init__(self) -> None:
        super().__init__(
            "The closed-form return probability only holds for delta_e = 0; "
            "use the numeric evolution instead."
        )


class QuadratureResolutionError(InvalidParametersError):
    """
    Raised when the tensor quadrature grid needed to resolve a time window
    exceeds the allowed number of realizations.

    Parameters:
        required: Realizations the window needs.
        limit: Allowed number of realizations.
        t_max: Window length in ns.
    """

    def __init__(self, required: int, limit: int, t_max: float) -> None:
        self.required = required
        self.limit = limit
        self.t_max = t_max
        super().__init__(
            f"Resolving {t_max:g} ns by quadrature needs {required} realizations, "
            f"more than the limit of {limit}. Use Monte Carlo averaging or a "
            "shorter window."
        )


class InsufficientDataError(HQCoherenceError):
    """
    Raised when a trace or an envelope has too few points for the requested
    operation.

    Parameters:
        required: Minimum number of points.
        actual: Number of points received.
    """

    def __init__(self, required: int, actual: int) -> None:
        self.required = required
        self.actual = actual
        super().__init__(f"At least {required} points are required, got {actual}.")


class TraceFormatError(HQCoherenceError):
    """
    Raised when a trace file cannot be parsed.

    Parameters:
        message: The error message.
    """


class ConfigurationError(HQCoherenceConfigurationError):
    """
    Raised when a run configuration is invalid.

    Parameters:
        diagnostics: Pairs of offending key and message.
    """

    def __init__(self, diagnostics: Sequence[tuple[str, str]]) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__(
            "; ".join(f"{key}: {message}" for key, message in self.diagnostics)
        )


class OutputError(HQCoherenceError):
    """
    Raised when an output file cannot be written.

    Parameters:
        path: The path that could not be written.
        error: The underlying OS error.
    """

    def __init__(self, path: str, error: OSError) -> None:
        self.path = path
        self.error = error
        super().__init__(f"Cannot write {path}: {error.strerror or error}")


__all__ = [
    "HQCoherenceError",
    "HQCoherenceConfigurationError",
    "InvalidParametersError",
    "DegenerateDistributionError",
    "AnalyticFormulaError",
    "QuadratureResolutionError",
    "InsufficientDataError",
    "TraceFormatError",
    "ConfigurationError",
    "OutputError",
]
