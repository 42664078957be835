# errors.py
"""
Error categories shared by every module.

The CLI maps each category to an exit code:
  ConfigError    -> 2
  DataError      -> 3
  NumericalError -> 4
"""


class QadError(RuntimeError):
    exit_code = 1


class ConfigError(QadError):
    exit_code = 2


class DataError(QadError):
    exit_code = 3


class NumericalError(QadError):
    exit_code = 4


# --- config ---
class CapacityError(ConfigError):
    """Requested qubit count is outside what the dense simulator holds."""


class PlanningError(ConfigError):
    pass


# --- data ---
class DimensionError(DataError, ValueError):
    pass


class DegenerateDataError(DataError):
    pass


class IngestionError(DataError):
    pass


class SettingsMismatchError(DataError):
    pass


class NormalizationError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


# --- numerical ---
class MitigationError(NumericalError):
    pass


class SolverError(NumericalError):
    pass
