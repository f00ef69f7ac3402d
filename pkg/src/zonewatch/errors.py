"""Shared exception types."""


class ZonewatchError(Exception):
    """Base class for all package errors."""


class ValidationError(ZonewatchError):
    """A parameter or input failed its precondition."""


class DecodeError(ZonewatchError):
    """Malformed bytes: bad key/signature length or a broken canonical record."""


class NotFittedError(ZonewatchError):
    """Estimator or monitor used before fit()."""


class InsufficientDataError(ZonewatchError):
    """Too few rows to satisfy an operation's minimum."""


class DivergedError(ZonewatchError):
    """Training diverged; try a smaller lr_n."""


class NotFoundError(ZonewatchError):
    """Lookup key does not resolve."""


class LedgerError(ZonewatchError):
    """Invalid ledger operation (e.g. sealing an empty pool)."""


class ZoneError(ZonewatchError):
    """Invalid zone-protocol operation."""


class FusionNumericError(ZonewatchError):
    """Degenerate innovation covariance in the Kalman update."""


class DegenerateEvalError(ZonewatchError):
    """Evaluation dataset does not contain both classes."""


class ScenarioError(ZonewatchError):
    """Scenario script syntax or semantic error, carries the line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
