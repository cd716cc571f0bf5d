"""Problem data and solution types for capacity-constrained treatment allocation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

DEFAULT_COST_SCALE = 10**6

# Largest magnitude a single scaled cost may take; keeps every sum the
# solvers form (path costs times path lengths) inside int64.
_INT64_SAFE = 2**62


class AllocationError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AllocationError, ValueError):
    pass


class NonRectangular(ValidationError):
    pass


class NonFiniteOutcome(ValidationError):
    pass


class NegativeCapacity(ValidationError):
    pass


class CapacityLengthMismatch(ValidationError):
    pass


class InvalidCostScale(ValidationError):
    pass


class CostOverflow(ValidationError, OverflowError):
    pass


class Infeasible(AllocationError):
    """Total capacity is smaller than the number of recipients."""


class InfeasibleBaseline(Infeasible):
    pass


class IndexOutOfRange(AllocationError, IndexError):
    pass


class CapacityViolated(AllocationError):
    pass


def _as_outcome_matrix(outcomes, n_treatments: int | None) -> np.ndarray:
    if isinstance(outcomes, np.ndarray):
        arr = outcomes
    else:
        rows = list(outcomes)
        if rows:
            width = len(rows[0])
            for i, row in enumerate(rows):
                if len(row) != width:
                    raise NonRectangular(
                        f"row {i} has {len(row)} entries, expected {width}")
        arr = np.asarray(rows, dtype=float)
    if arr.size == 0 and arr.ndim < 2:
        arr = arr.reshape(0, n_treatments or 0)
    if arr.ndim != 2:
        raise NonRectangular(f"outcomes must be 2-dimensional, got ndim={arr.ndim}")
    return np.array(arr, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Outcome matrix (recipients x treatments) plus per-treatment capacities.

    ``outcomes[i, j]`` is the outcome of recipient ``i`` under treatment ``j``;
    ``capacities[j]`` bounds how many recipients treatment ``j`` may serve.
    Construction validates every invariant and raises the matching
    ``ValidationError`` subclass on the first violation.
    """

    outcomes: np.ndarray
    capacities: np.ndarray
    cost_scale: int = DEFAULT_COST_SCALE

    def __post_init__(self):
        caps_in = self.capacities
        if np.ndim(caps_in) == 0:
            raise CapacityLengthMismatch("capacities must be a sequence")
        caps_list = list(np.asarray(caps_in).ravel())
        outcomes = _as_outcome_matrix(self.outcomes, len(caps_list))
        for j, c in enumerate(caps_list):
            if float(c) != int(c):
                raise ValidationError(f"capacity {j} is not an integer: {c!r}")
        caps = np.asarray([int(c) for c in caps_list], dtype=np.int64)
        outcomes.setflags(write=False)
        caps.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "capacities", caps)
        validate(self)

    @classmethod
    def uniform(cls, outcomes, capacity: int, cost_scale: int = DEFAULT_COST_SCALE):
        """Instance where every treatment has the same capacity."""
        arr = _as_outcome_matrix(outcomes, None)
        return cls(arr, [capacity] * arr.shape[1], cost_scale)

    @property
    def n_recipients(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_treatments(self) -> int:
        return self.outcomes.shape[1]

    @cached_property
    def scaled_costs(self) -> np.ndarray:
        """Outcomes times cost_scale, rounded to the nearest integer (int64)."""
        scaled = np.rint(self.outcomes * self.cost_scale)
        biggest = float(np.max(np.abs(scaled))) if scaled.size else 0.0
        if biggest * max(self.n_recipients, 1) >= _INT64_SAFE:
            raise CostOverflow(
                f"scaled outcomes reach {biggest:.3g}; with {self.n_recipients} "
                f"recipients this overflows int64 (lower cost_scale)")
        out = scaled.astype(np.int64)
        out.setflags(write=False)
        return out

    def shifted(self, c: float) -> "ProblemInstance":
        return ProblemInstance(self.outcomes + c, self.capacities, self.cost_scale)


def validate(instance: ProblemInstance) -> None:
    """Raise the first violated ProblemInstance invariant; return None if valid."""
    y = instance.outcomes
    if y.ndim != 2:
        raise NonRectangular("outcomes must be a matrix")
    if not np.all(np.isfinite(y)):
        i, j = np.argwhere(~np.isfinite(y))[0]
        raise NonFiniteOutcome(f"outcome[{i}][{j}] = {y[i, j]} is not finite")
    caps = instance.capacities
    if caps.shape != (y.shape[1],):
        raise CapacityLengthMismatch(
            f"{caps.shape[0]} capacities given for {y.shape[1]} treatments")
    if np.any(caps < 0):
        j = int(np.argmax(caps < 0))
        raise NegativeCapacity(f"capacity {j} is negative ({caps[j]})")
    scale = instance.cost_scale
    if isinstance(scale, bool) or int(scale) != scale or scale < 1:
        raise InvalidCostScale(f"cost_scale must be a positive integer, got {scale!r}")


def feasibility_check(instance: ProblemInstance) -> bool:
    """True iff some allocation exists, i.e. total capacity covers all recipients."""
    return int(instance.capacities.sum()) >= instance.n_recipients


@dataclass(frozen=True, eq=False)
class Allocation:
    """``assignment[i]`` is the treatment index given to recipient ``i``."""

    assignment: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        arr = np.array(self.assignment, dtype=np.int64).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)

    def __len__(self):
        return len(self.assignment)

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.assignment.tobytes())

    def tolist(self) -> list[int]:
        return self.assignment.tolist()

    def counts(self, n_treatments: int) -> np.ndarray:
        return np.bincount(self.assignment, minlength=n_treatments)


def check_allocation(instance: ProblemInstance, alloc: Allocation | Sequence[int]) -> None:
    alloc = as_allocation(alloc)
    a = alloc.assignment
    if len(a) != instance.n_recipients:
        raise IndexOutOfRange(
            f"allocation covers {len(a)} recipients, instance has {instance.n_recipients}")
    if len(a) and (a.min() < 0 or a.max() >= instance.n_treatments):
        bad = int(np.argmax((a < 0) | (a >= instance.n_treatments)))
        raise IndexOutOfRange(f"recipient {bad} assigned to treatment {a[bad]}")
    over = alloc.counts(instance.n_treatments) > instance.capacities
    if np.any(over):
        j = int(np.argmax(over))
        raise CapacityViolated(
            f"treatment {j} serves {alloc.counts(instance.n_treatments)[j]} "
            f"recipients, capacity {instance.capacities[j]}")


@dataclass(frozen=True)
class AllocationValue:
    total: float
    mean: float


def allocation_value(instance: ProblemInstance,
                     alloc: Allocation | Sequence[int]) -> AllocationValue:
    alloc = as_allocation(alloc)
    check_allocation(instance, alloc)
    n = instance.n_recipients
    if n == 0:
        return AllocationValue(0.0, 0.0)
    total = float(math.fsum(instance.outcomes[np.arange(n), alloc.assignment]))
    return AllocationValue(total, total / n)


def recipient_outcomes(instance: ProblemInstance, alloc: Allocation) -> np.ndarray:
    return instance.outcomes[np.arange(instance.n_recipients), alloc.assignment]


def as_allocation(obj: Allocation | Sequence[int] | np.ndarray) -> Allocation:
    return obj if isinstance(obj, Allocation) else Allocation(obj)
