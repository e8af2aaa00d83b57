"""Worst-case control of finite partially observed systems with max-plus cost distributions."""
from .distributions import (
    CostDistribution,
    JointCostDistribution,
    accrued_distribution,
    condition,
    distribution_distance,
    indicator,
    lemma2_gap,
    lipschitz_constant,
    max_functional,
    pushforward,
)
from .errors import (
    BudgetExceededError,
    ConditioningError,
    DomainError,
    InvalidInfoStateError,
    MinimaxError,
    PreconditionError,
    SpecError,
    StrategyIncompleteError,
)
from .sets import FiniteMetricSpace, Point, RangeRelation, conditional_range, hausdorff, product_space
from .system import (
    Memory,
    MemoryGraph,
    QuotientGraph,
    Strategy,
    SystemSpec,
    Trajectory,
    conditional_accrued,
    enumerate_memories,
    joint_range,
    simulate,
    transition_accrued,
    worst_case_cost,
)

__version__ = "0.1.0"
