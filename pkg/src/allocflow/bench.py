"""Timing grid over generated instances."""

from __future__ import annotations

import math
import statistics
import time

import numpy as np

from . import _kernels
from .solver import SolverConfig, solve
from .synth import generate_instance

FIELDS = ("backend", "rule", "n1", "n2", "capacity", "rep", "seconds", "iterations", "total")


def run_grid(n1: int, n2_grid, rules=("min_mean",), repetitions: int = 3,
             capacity: int | None = None, heterogeneity: float = 1.0, seed: int = 0):
    """Solve one generated instance per (n2, repetition) under every rule.

    Instance seeds depend only on (seed, n2, rep), so every rule sees the same
    instances.  Capacity defaults to the tight value ceil(n2 / n1).
    """
    rows = []
    # warm the JIT so the first cell is not charged for compilation
    solve(generate_instance(2, 2, 1, seed=0), SolverConfig("min_mean"))
    solve(generate_instance(2, 2, 1, seed=0), SolverConfig("bellman_ford"))
    for n2 in n2_grid:
        cap = capacity if capacity is not None else math.ceil(n2 / n1)
        for rep in range(repetitions):
            cell_seed = int(np.random.SeedSequence([seed, n2, rep]).generate_state(1)[0])
            inst = generate_instance(n1, n2, cap, heterogeneity, seed=cell_seed)
            for rule in rules:
                t0 = time.perf_counter()
                report = solve(inst, SolverConfig(rule))
                dt = time.perf_counter() - t0
                rows.append({"backend": _kernels.BACKEND, "rule": rule, "n1": n1, "n2": n2,
                             "capacity": cap, "rep": rep, "seconds": dt,
                             "iterations": report.iterations, "total": report.value.total})
    return rows


def median_seconds(rows, rule: str) -> dict[int, float]:
    by_n2: dict[int, list[float]] = {}
    for r in rows:
        if r["rule"] == rule:
            by_n2.setdefault(r["n2"], []).append(r["seconds"])
    return {n2: statistics.median(ts) for n2, ts in sorted(by_n2.items())}
