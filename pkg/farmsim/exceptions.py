from typing import Any


class FarmSimException(Exception): ...


class InvalidScenario(FarmSimException): ...


class ConfigurationError(FarmSimException): ...


class InvariantViolation(FarmSimException):
    """Internal state became inconsistent. The affected run is aborted."""


class CalendarCorruption(InvariantViolation): ...


class ObservationWindowError(FarmSimException): ...


class BenchmarkError(FarmSimException): ...


class FluidConvergenceError(FarmSimException):
    def __init__(self, message: str, last_iterate: Any, residual: float) -> None:
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class TraceFormatError(FarmSimException):
    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row
