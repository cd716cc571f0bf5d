"""Shared fixtures and independent reference computations for the test suite.

Nothing here calls into the flow solver: cycle enumeration, allocation
enumeration and exact permutation p-values are written from scratch so they
can serve as oracles.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from allocflow import ProblemInstance

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip())
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ------------------------------------------------------------------ instances


def random_small_instance(rng, max_n1=4, max_n2=8, max_cap=3, lo=-9, hi=9, scale=1):
    """Feasible integer instance inside the small-oracle envelope."""
    n1 = int(rng.integers(1, max_n1 + 1))
    caps = rng.integers(0, max_cap + 1, n1)
    n2 = int(rng.integers(0, min(max_n2, int(caps.sum())) + 1))
    y = rng.integers(lo, hi + 1, (n2, n1))
    return ProblemInstance(y, caps, cost_scale=scale)


def random_baseline(rng, instance):
    slots = np.repeat(np.arange(instance.n_treatments), instance.capacities)
    return rng.permutation(slots)[: instance.n_recipients]


@st.composite
def small_instances(draw, max_n1=4, max_n2=6, max_cap=3):
    n1 = draw(st.integers(1, max_n1))
    caps = draw(st.lists(st.integers(0, max_cap), min_size=n1, max_size=n1))
    n2 = draw(st.integers(0, min(max_n2, sum(caps))))
    rows = draw(st.lists(st.lists(st.integers(-9, 9), min_size=n1, max_size=n1),
                         min_size=n2, max_size=n2))
    y = np.array(rows, dtype=float).reshape(n2, n1)
    return ProblemInstance(y, caps, cost_scale=1)


# ------------------------------------------------------- exhaustive references


def all_feasible_allocations(instance, allowed=None):
    n1, n2 = instance.n_treatments, instance.n_recipients
    caps = instance.capacities
    for cand in itertools.product(range(n1), repeat=n2):
        if allowed is not None and not all(allowed[i][j] for i, j in enumerate(cand)):
            continue
        counts = [0] * n1
        for j in cand:
            counts[j] += 1
        if all(c <= m for c, m in zip(counts, caps)):
            yield cand


def optimal_set(instance, allowed=None):
    """(best total, set of all maximising assignment tuples) by enumeration."""
    y = instance.outcomes
    best, arg = None, set()
    for cand in all_feasible_allocations(instance, allowed):
        total = sum(y[i][j] for i, j in enumerate(cand))
        if best is None or total > best:
            best, arg = total, {cand}
        elif total == best:
            arg.add(cand)
    return best, arg


def simple_cycles_min_mean(n, arcs):
    """Minimum mean over all simple directed cycles, by DFS enumeration.

    ``arcs`` is a list of (tail, head, cost); parallel arcs allowed.  Returns
    a Fraction, or None for an acyclic graph.
    """
    best_arc: dict = {}
    for t, h, c in arcs:
        if (t, h) not in best_arc or c < best_arc[(t, h)]:
            best_arc[(t, h)] = c
    succ = {v: sorted(h for (t, h) in best_arc if t == v) for v in range(n)}
    best = None

    def dfs(start, v, path_cost, length, visited):
        nonlocal best
        for w in succ[v]:
            c = path_cost + best_arc[(v, w)]
            if w == start:
                mean = Fraction(c, length + 1)
                if best is None or mean < best:
                    best = mean
            elif w > start and w not in visited:
                visited.add(w)
                dfs(start, w, c, length + 1, visited)
                visited.remove(w)

    for s in range(n):
        dfs(s, s, 0, 0, {s})
    return best


def _splits(items, sizes):
    if not sizes:
        yield ()
        return
    for chosen in itertools.combinations(items, sizes[0]):
        rest = [x for x in items if x not in chosen]
        for tail in _splits(rest, sizes[1:]):
            yield (chosen,) + tail


def exact_permutation_pvalue(groups):
    """Exact right-tail p-value by enumerating every arm-size-preserving
    reassignment within each group.  ``groups`` maps group -> {arm: values}.
    Pair-weighted statistic."""

    def stat(assignments):
        diffs = []
        for arms in assignments:
            means = [sum(v) / len(v) for v in arms]
            diffs += [abs(a - b) for a, b in itertools.combinations(means, 2)]
        return sum(diffs) / len(diffs)

    per_group = []
    observed_parts = []
    for arms in groups.values():
        arm_vals = list(arms.values())
        pool = [x for v in arm_vals for x in v]
        sizes = [len(v) for v in arm_vals]
        idx = list(range(len(pool)))
        options = [tuple(tuple(pool[i] for i in part) for part in split)
                   for split in _splits(idx, sizes)]
        per_group.append(options)
        observed_parts.append(tuple(tuple(v) for v in arm_vals))
    observed = stat(observed_parts)
    hits = total = 0
    for combo in itertools.product(*per_group):
        total += 1
        if stat(combo) >= observed - 1e-12:
            hits += 1
    return Fraction(hits, total), observed
