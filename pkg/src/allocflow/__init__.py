"""Optimal capacity-constrained treatment allocation via minimum-cost flow."""

from .heuristic import greedy_allocate
from .model import (
    Allocation,
    AllocationError,
    AllocationValue,
    CapacityLengthMismatch,
    CapacityViolated,
    CostOverflow,
    IndexOutOfRange,
    Infeasible,
    InfeasibleBaseline,
    NegativeCapacity,
    NonFiniteOutcome,
    NonRectangular,
    ProblemInstance,
    ValidationError,
    allocation_value,
    feasibility_check,
    validate,
)
from .network import (
    Flow,
    Network,
    ResidualNetwork,
    balance_vector,
    build_network,
    build_pareto_network,
    extract_allocation,
    flow_cost,
    flow_from_allocation,
    is_feasible,
    residual,
)
from .oracle import TooLarge, brute_force_optimal, brute_force_pareto
from .solver import (
    Cycle,
    IterationCapExceeded,
    SolveReport,
    SolverConfig,
    cancel_cycles,
    find_min_mean_cycle,
    find_negative_cycle,
    initial_feasible_flow,
    solve,
    solve_pareto,
)
from .stats import (
    GroupedOutcomes,
    MechanismReport,
    NoPairs,
    PermutationReport,
    avg_abs_difference,
    compare_mechanisms,
    holm_sidak,
    permutation_test,
)

__version__ = "0.1.0"
