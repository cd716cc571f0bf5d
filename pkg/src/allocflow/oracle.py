"""Exhaustive reference solvers for small instances.

These enumerate every treatment vector in lexicographic order and keep the
first maximiser, so results are deterministic.  They share nothing with the
flow solver beyond the instance type, which is the point.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import (
    Allocation,
    AllocationError,
    AllocationValue,
    Infeasible,
    InfeasibleBaseline,
    ProblemInstance,
    as_allocation,
    check_allocation,
)

DEFAULT_CAP = 10**7
_BLOCK = 1 << 16


class TooLarge(AllocationError):
    pass


def _suffix_block(n1: int, width: int) -> np.ndarray:
    # all vectors of length `width` over range(n1), lexicographic
    if width == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((n1,) * width).reshape(width, -1).T
    return grids.astype(np.int64)


def _search(instance: ProblemInstance, allowed: np.ndarray, cap: int):
    n1, n2 = instance.n_treatments, instance.n_recipients
    if n2 == 0:
        return Allocation([]), AllocationValue(0.0, 0.0)
    if n1 == 0:
        raise Infeasible("no treatments")
    if n1 ** n2 > cap:
        raise TooLarge(f"{n1}^{n2} candidate assignments exceed the cap of {cap}")
    y = instance.outcomes
    caps = instance.capacities
    width = n2
    while width > 0 and n1 ** width > _BLOCK:
        width -= 1
    suffix = _suffix_block(n1, width)
    cols = np.arange(n2 - width, n2)
    best_total, best = None, None
    for prefix in itertools.product(range(n1), repeat=n2 - width):
        pre = np.asarray(prefix, dtype=np.int64)
        if len(pre) and not allowed[np.arange(len(pre)), pre].all():
            continue
        pre_counts = np.bincount(pre, minlength=n1)
        if np.any(pre_counts > caps):
            continue
        cand = suffix
        ok = allowed[cols, cand].all(axis=1) if width else np.ones(1, bool)
        counts = np.zeros((len(cand), n1), dtype=np.int64)
        for c in range(width):
            counts[np.arange(len(cand)), cand[:, c]] += 1
        ok &= np.all(counts + pre_counts <= caps, axis=1)
        if not ok.any():
            continue
        totals = y[cols, cand].sum(axis=1) if width else np.zeros(1)
        totals = totals + (y[np.arange(len(pre)), pre].sum() if len(pre) else 0.0)
        totals = np.where(ok, totals, -np.inf)
        k = int(np.argmax(totals))
        if best_total is None or totals[k] > best_total:
            best_total = float(totals[k])
            best = np.concatenate([pre, cand[k]])
    if best is None:
        raise Infeasible("no assignment satisfies the constraints")
    alloc = Allocation(best)
    total = float(y[np.arange(n2), best].sum())
    return alloc, AllocationValue(total, total / n2)


def brute_force_optimal(instance: ProblemInstance, cap: int = DEFAULT_CAP):
    """Best allocation by enumeration; ties go to the lexicographically smallest."""
    allowed = np.ones(instance.outcomes.shape, dtype=bool)
    return _search(instance, allowed, cap)


def brute_force_pareto(instance: ProblemInstance, baseline, cap: int = DEFAULT_CAP):
    """Best allocation in which every recipient does at least as well as under
    ``baseline``."""
    baseline = as_allocation(baseline)
    try:
        check_allocation(instance, baseline)
    except AllocationError as exc:
        raise InfeasibleBaseline(str(exc)) from exc
    y = instance.outcomes
    base = y[np.arange(instance.n_recipients), baseline.assignment]
    return _search(instance, y >= base[:, None], cap)
