from typing import Any, Optional


class ObslabError(Exception):
    """Base error. `exit_code` is what the command line returns for it."""

    exit_code: int = 2

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.witness = witness

    def __str__(self) -> str:
        if self.witness is None:
            return self.message
        return f"{self.message} (witness: {self.witness})"


# invalid input, exit 2

class InvalidInput(ObslabError):
    exit_code = 2


class ProblemFormatError(InvalidInput):
    pass


class InvalidTable(InvalidInput):
    pass


class NotSubgroup(InvalidInput):
    pass


class NotNormal(InvalidInput):
    pass


class InvalidSection(InvalidInput):
    pass


class InvalidAutomorphism(InvalidInput):
    pass


class InvalidAction(InvalidInput):
    pass


class InvalidFlow(InvalidInput):
    pass


class InvalidCochain(InvalidInput):
    pass


class ContextMismatch(InvalidInput):
    pass


class SectionMismatch(InvalidInput):
    pass


class IncompatibleModulus(InvalidInput):
    pass


class NotACocycle(InvalidInput):
    pass


class NotCobounding(InvalidInput):
    pass


class NotNormalizedOnFlow(InvalidInput):
    pass


class NotInZLM(InvalidInput):
    pass


class InvalidXi(InvalidInput):
    pass


class FlowPartNotCobounding(InvalidInput):
    pass


class FiberViolated(InvalidInput):
    pass


class ActionNotDescending(InvalidInput):
    pass


class BudgetExceeded(ObslabError):
    exit_code = 2


# mathematical violations, exit 1

class Violation(ObslabError):
    exit_code = 1


class VerificationFailed(Violation):
    pass


class TorusCoercionFailed(Violation):
    pass


class ExactnessViolation(Violation):
    pass


def ensure_budget(cost: int, budget: int, what: str) -> None:
    """Raise BudgetExceeded when `cost` (elementary steps or candidates) is over `budget`."""
    if cost > budget:
        raise BudgetExceeded(
            f"{what} needs {cost} steps, budget is {budget} (raise OBSLAB_BUDGET or --budget)",
            witness={"cost": int(cost), "budget": int(budget)},
        )
