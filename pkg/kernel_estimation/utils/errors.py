"""Custom exception classes for the kernel estimation toolkit."""

from typing import Any, Dict, Optional


class KernelEstimationError(Exception):
    """Base exception for all toolkit errors."""

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        error_code: str = "KERNEL_ESTIMATION_ERROR",
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class InvalidArgumentError(KernelEstimationError):
    """Raised when an argument is outside its valid domain."""

    exit_code = 2

    def __init__(self, message: str, argument: Optional[str] = None, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "ARGUMENT_ERROR", details or {})
        if argument:
            self.details["argument"] = argument


class DimensionError(KernelEstimationError):
    """Raised when tensor or image extents are incompatible."""

    exit_code = 2

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "DIMENSION_ERROR", details)


class ContractError(KernelEstimationError):
    """Raised when a caller breaks an operation contract (e.g. non-scalar loss)."""

    exit_code = 2

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "CONTRACT_ERROR", details)


class ConfigurationError(KernelEstimationError):
    """Raised when there's a configuration issue."""

    exit_code = 2

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "CONFIGURATION_ERROR", details)


class DatasetError(KernelEstimationError):
    """Raised when an image source is empty or unreadable."""

    exit_code = 2

    def __init__(self, message: str, source: Optional[str] = None, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "DATASET_ERROR", details or {})
        if source:
            self.details["source"] = source


class FormatError(KernelEstimationError):
    """Raised when a container, checkpoint or image file is malformed."""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "FORMAT_ERROR", details or {})
        if path:
            self.details["path"] = path


class StateError(KernelEstimationError):
    """Raised when persisted state does not match the requested configuration."""

    exit_code = 3

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "STATE_ERROR", details)


class NumericError(KernelEstimationError):
    """Raised when a computation produces NaN or Inf."""

    exit_code = 4

    def __init__(self, message: str, operation: Optional[str] = None, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, "NUMERIC_ERROR", details or {})
        if operation:
            self.details["operation"] = operation
