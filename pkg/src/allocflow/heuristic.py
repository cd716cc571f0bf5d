"""Greedy one-pass allocation used as a baseline against the optimal solver."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import Allocation, Infeasible, ProblemInstance, feasibility_check


def greedy_allocate(instance: ProblemInstance, order: Sequence[int] | None = None) -> Allocation:
    """Visit recipients in ``order`` (default: index order) and give each the
    treatment with the highest outcome among those not yet at capacity.

    Ties go to the lowest treatment index.  The result depends on ``order``.
    """
    if not feasibility_check(instance):
        raise Infeasible("total capacity is below the number of recipients")
    n = instance.n_recipients
    order = np.arange(n) if order is None else np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError("order must be a permutation of the recipient indices")
    remaining = instance.capacities.copy()
    assign = np.empty(n, dtype=np.int64)
    y = instance.outcomes
    for i in order:
        row = np.where(remaining > 0, y[i], -np.inf)
        j = int(np.argmax(row))
        assign[i] = j
        remaining[j] -= 1
    return Allocation(assign)
