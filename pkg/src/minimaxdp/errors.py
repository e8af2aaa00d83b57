"""Exception hierarchy."""


class MinimaxError(Exception):
    """Base class for library errors."""


class DomainError(MinimaxError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConditioningError(MinimaxError, ValueError):
    """Conditioning on a realization with empty range (cost -inf)."""


class SpecError(MinimaxError, ValueError):
    """A system or problem file violates totality or metric axioms."""


class StrategyIncompleteError(MinimaxError, KeyError):
    """A strategy has no action for a visited memory."""


class PreconditionError(MinimaxError, ValueError):
    """A constructor's structural precondition does not hold for the spec."""


class InvalidInfoStateError(MinimaxError, ValueError):
    """A compressor fails the information-state conditions."""

    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


class BudgetExceededError(MinimaxError, RuntimeError):
    """The feasible-memory estimate is larger than the enumeration budget."""

    def __init__(self, estimate, budget):
        super().__init__(
            f"feasible-memory estimate {estimate} exceeds budget {budget}; "
            "raise --budget or MINIMAX_DP_BUDGET to proceed"
        )
        self.estimate = estimate
        self.budget = budget
