"""Budget-constrained contextual bandits with hierarchical adaptive allocation."""

from .allocation import (
    AllocationState,
    AlphaTildeMode,
    BudgetState,
    ClassProfile,
    DraSolution,
    retain_probability,
    solve_dra,
    step_budget,
    update_class_value,
)
from .errors import (
    BudgetViolationError,
    ContractViolationError,
    HatchError,
    InvalidArgumentError,
    SnapshotFormatError,
)
from .linear import ArmModels, RidgeModel, new_ridge
from .policy import Decision, PolicyConfig, PolicyKind, make_policy

__version__ = "0.1.0"

__all__ = [
    "AllocationState",
    "AlphaTildeMode",
    "ArmModels",
    "BudgetState",
    "BudgetViolationError",
    "ClassProfile",
    "ContractViolationError",
    "Decision",
    "DraSolution",
    "HatchError",
    "InvalidArgumentError",
    "PolicyConfig",
    "PolicyKind",
    "RidgeModel",
    "SnapshotFormatError",
    "make_policy",
    "new_ridge",
    "retain_probability",
    "solve_dra",
    "step_budget",
    "update_class_value",
]
