"""Exception hierarchy shared by all modules.

Every error carries a stable ``code`` string so the CLI can map it to an
exit status and a JSON error object without string matching.
"""

from __future__ import annotations


class BJSError(Exception):
    """Base class. ``exit_code`` follows the CLI convention (2 spec, 3 numeric)."""

    code = "error"
    exit_code = 3

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), "details": self.details}


class InvalidSpec(BJSError):
    code = "InvalidSpec"
    exit_code = 2


class NotPositiveSemidefinite(BJSError):
    code = "NotPositiveSemidefinite"


class SingularBlock(BJSError):
    code = "SingularBlock"


class GrowthOverflow(BJSError):
    code = "GrowthOverflow"


class WindowTooShort(BJSError):
    code = "WindowTooShort"


class BudgetExhausted(BJSError):
    code = "BudgetExhausted"


class MissingPeriodData(BJSError):
    code = "MissingPeriodData"
    exit_code = 2


class TruncationSingular(BJSError):
    code = "TruncationSingular"


class NonConverged(BJSError):
    code = "NonConverged"


class HorizonExceeded(BJSError):
    code = "HorizonExceeded"


class HypothesisUnmet(BJSError):
    code = "HypothesisUnmet"
