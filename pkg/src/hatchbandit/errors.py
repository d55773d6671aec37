"""Exception types shared across the package."""


class HatchError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(HatchError, ValueError):
    """An argument violates a documented precondition."""


class BudgetViolationError(HatchError):
    """A cost-incurring action was attempted with no remaining budget."""


class ContractViolationError(HatchError):
    """A call sequence broke the policy protocol (e.g. feedback on a skipped round)."""


class SnapshotFormatError(HatchError):
    """A persisted snapshot is corrupt, mis-versioned or incompatible."""
