"""Errors - Hierarki exception RDS beserta kode keluar CLI."""

from typing import Optional


class RDSError(Exception):
    exit_code = 1

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class ConfigError(RDSError):
    exit_code = 2


class DesignError(ConfigError):
    pass


class DataError(RDSError):
    exit_code = 3


class NodeIndexError(DataError, IndexError):
    pass


class AttributeMissingError(DataError, KeyError):
    def __str__(self) -> str:
        return self.message


class RepairError(DataError):
    pass


class ImputationError(DataError):
    pass


class NumericError(RDSError):
    exit_code = 4


class GenerationError(NumericError):
    pass


class CalibrationError(NumericError):
    pass


class UndefinedRatioError(NumericError):
    pass


class NumericOverflowError(NumericError):
    pass


class StallError(NumericError):
    pass


class EstimatorUndefinedError(NumericError):
    pass


class WeightError(NumericError):
    pass


class BootstrapError(NumericError):
    pass


class VarianceError(NumericError):
    pass


class ScenarioAbortError(NumericError):
    pass
