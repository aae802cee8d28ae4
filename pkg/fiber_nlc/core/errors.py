"""Error handling for the fiber nonlinearity compensation toolkit."""

from typing import Any, Dict, Optional, Type


class FiberNlcError(Exception):
    """Base exception class for all fiber-nlc errors."""

    code: str = "fiber_nlc_error"
    exit_code: int = 1

    def __init__(
        self, message: str, stage_id: Optional[str] = None, details: Optional[Dict[str, Any]] = None
    ):
        """Initialize a new FiberNlcError.

        Args:
            message: Human-readable error message
            stage_id: ID of the technique or stage that caused the error, if applicable
            details: Additional error details
        """
        self.message = message
        self.stage_id = stage_id
        self.details = details or {}
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to a dictionary.

        Returns:
            Dictionary representation of the error
        """
        result: Dict[str, Any] = {
            "code": self.code,
            "message": self.message,
            "exit_code": self.exit_code,
        }
        if self.stage_id:
            result["stage_id"] = self.stage_id
        if self.details:
            result["details"] = self.details
        return result


class ConfigurationError(FiberNlcError):
    """Error raised when a configuration, spec or table reference is invalid."""

    code = "configuration_error"
    exit_code = 2


class ParameterError(FiberNlcError):
    """Error raised when a numeric parameter is outside its valid range."""

    code = "parameter_error"
    exit_code = 2


class LengthError(FiberNlcError):
    """Error raised when a sequence length does not fit the operation."""

    code = "length_error"
    exit_code = 2


class NumericDomainError(FiberNlcError):
    """Error raised on a non-finite intermediate or a square-root branch crossing."""

    code = "numeric_domain_error"
    exit_code = 3


class QuadratureError(FiberNlcError):
    """Error raised when panel doubling fails to converge."""

    code = "quadrature_error"
    exit_code = 3


class DegenerateQuantizationError(FiberNlcError):
    """Error raised when the quantization step wipes out the reference coefficient."""

    code = "degenerate_quantization_error"
    exit_code = 3


class TableFormatError(FiberNlcError):
    """Error raised when a LUT file has a bad magic, version or layout."""

    code = "table_format_error"
    exit_code = 4


class ChecksumError(FiberNlcError):
    """Error raised when a LUT file fails its CRC check or is truncated."""

    code = "checksum_error"
    exit_code = 4


class ExperimentError(FiberNlcError):
    """Error raised when an experiment cannot be run or produces no usable data."""

    code = "experiment_error"
    exit_code = 5


class RuntimeExceededError(ExperimentError):
    """Error raised when a run exceeds its runtime budget."""

    code = "runtime_exceeded_error"
    exit_code = 6


def _all_subclasses(cls: Type[FiberNlcError]) -> Dict[str, Type[FiberNlcError]]:
    found: Dict[str, Type[FiberNlcError]] = {}
    for sub in cls.__subclasses__():
        found[sub.code] = sub
        found.update(_all_subclasses(sub))
    return found


def get_error_class_by_code(code: str) -> Type[FiberNlcError]:
    """Get an error class by its code.

    Args:
        code: The error code

    Returns:
        The error class

    Raises:
        ValueError: If the error code is not recognized
    """
    error_classes = _all_subclasses(FiberNlcError)
    if code not in error_classes:
        raise ValueError(f"Unknown error code: {code}")
    return error_classes[code]
