"""Exception hierarchy. Each class carries the CLI exit code it maps to."""
import os


class RiskUtilError(Exception):
    exit_code = 2


class InputError(RiskUtilError, ValueError):
    """Malformed input: bad schema, out-of-range index, invalid distribution."""


class CoverageError(RiskUtilError):
    """A policy was queried at a (h, s, y) triple where it is undefined."""


class InfeasibleError(RiskUtilError):
    exit_code = 3


class BudgetError(RiskUtilError):
    exit_code = 4


class CapExceededError(BudgetError):
    pass


class ElicitationError(RiskUtilError):
    exit_code = 2


def resolve_cap(default: int) -> int:
    """Enumeration/evaluation cap, overridable through RISKUTIL_CAP."""
    raw = os.environ.get("RISKUTIL_CAP")
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(float(raw))
    except ValueError as exc:
        raise InputError(f"RISKUTIL_CAP must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise InputError("RISKUTIL_CAP must be positive")
    return value
