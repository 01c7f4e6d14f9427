"""Exception hierarchy shared by every module."""


class AttritionRIError(Exception):
    """Base class for all package errors."""


class InvariantViolation(AttritionRIError, ValueError):
    """A dataset or configuration breaks one of its structural rules."""


class ParseError(AttritionRIError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class EmptyControlReporters(AttritionRIError, ValueError):
    """No unit is both untreated and reporting, so the target is undefined."""


class MissingOutcome(AttritionRIError, ValueError):
    """A statistic needed an outcome that was never observed."""


class BudgetExceeded(AttritionRIError, RuntimeError):
    """An enumeration would exceed its configured size budget."""


class SupportTooLarge(AttritionRIError, ValueError):
    """Too many distinct outcome values for the small-support route."""


class InfeasibleCounts(AttritionRIError, ValueError):
    """Treated counts are incompatible with the always-reporter counts."""


class NoFeasibleTable(AttritionRIError, RuntimeError):
    """No always-reporter table satisfies the observed-statistic constraint."""
