"""Between-arm heterogeneity test and mechanism comparison.

The heterogeneity statistic is the average, over all pairs of arms that
share a group, of the absolute difference between the two arms' mean
outcomes.  Its null distribution comes from shuffling outcomes within each
group while keeping every arm's size fixed.

Replicate ``r`` of a test seeded with ``seed`` draws from numpy's PCG64
generator initialised with ``SeedSequence([seed, r])``, so reports do not
depend on how replicates are split across workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .heuristic import greedy_allocate
from .model import (
    Allocation,
    AllocationError,
    ProblemInstance,
    allocation_value,
    as_allocation,
    check_allocation,
)
from .solver import SolverConfig, solve, solve_pareto

WEIGHTINGS = ("pair", "group")
# ties between a replicate and the observed statistic are decided up to this
# relative tolerance, since summation order differs between permutations
_TIE_RTOL = 1e-12


class NoPairs(AllocationError, ValueError):
    """Every group has a single arm, so no arm pair can be compared."""


class GroupedOutcomes:
    """Outcomes observed under arms (e.g. nurses) nested in groups.

    Observations are stored sorted by (group, arm) in first-appearance order,
    so each group and each arm occupies a contiguous slice.
    """

    def __init__(self, records: Iterable[tuple[Hashable, Hashable, float]]):
        records = list(records)
        group_index: dict = {}
        arm_index: dict = {}
        keyed = []
        for n, (g, a, y) in enumerate(records):
            gi = group_index.setdefault(g, len(group_index))
            ai = arm_index.setdefault((g, a), len(arm_index))
            y = float(y)
            if not math.isfinite(y):
                raise ValueError(f"record {n}: outcome {y} is not finite")
            keyed.append((gi, ai, n, y))
        keyed.sort()
        self.group_labels = list(group_index)
        self.arm_labels = list(arm_index)
        self.values = np.array([k[3] for k in keyed], dtype=np.float64)
        self.group_of = np.array([k[0] for k in keyed], dtype=np.int64)
        self.arm_of = np.array([k[1] for k in keyed], dtype=np.int64)
        n_arms = len(arm_index)
        self.arm_size = np.bincount(self.arm_of, minlength=n_arms).astype(np.float64)
        self.arm_group = np.array([group_index[g] for g, _ in self.arm_labels], dtype=np.int64)
        pa, pb = [], []
        for g in range(len(self.group_labels)):
            arms = np.flatnonzero(self.arm_group == g)
            for x in range(len(arms)):
                for y in range(x + 1, len(arms)):
                    pa.append(arms[x])
                    pb.append(arms[y])
        self.pair_a = np.array(pa, dtype=np.int64)
        self.pair_b = np.array(pb, dtype=np.int64)

    @classmethod
    def from_mapping(cls, groups: Mapping[Hashable, Mapping[Hashable, Sequence[float]]]):
        records = []
        for g, arms in groups.items():
            if not arms:
                raise ValueError(f"group {g!r} has no arms")
            for a, ys in arms.items():
                if len(ys) == 0:
                    raise ValueError(f"arm {a!r} in group {g!r} has no observations")
                records.extend((g, a, y) for y in ys)
        return cls(records)

    @property
    def n_obs(self) -> int:
        return len(self.values)

    @property
    def n_pairs(self) -> int:
        return len(self.pair_a)

    def pair_weights(self, weighting: str = "pair") -> np.ndarray:
        if weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.n_pairs == 0:
            raise NoPairs("no group has two or more arms")
        if weighting == "pair":
            return np.full(self.n_pairs, 1.0 / self.n_pairs)
        pair_group = self.arm_group[self.pair_a]
        per_group = np.bincount(pair_group)
        n_groups = np.count_nonzero(per_group)
        return 1.0 / (n_groups * per_group[pair_group])

    def _stats(self, perms: np.ndarray, weights: np.ndarray) -> np.ndarray:
        return _kernels.replicate_stats(self.values, perms, self.arm_of, self.arm_size,
                                        self.pair_a, self.pair_b, weights)


def avg_abs_difference(data: GroupedOutcomes, weighting: str = "pair") -> float:
    w = data.pair_weights(weighting)
    identity = np.arange(data.n_obs, dtype=np.int64)[None, :]
    return float(data._stats(identity, w)[0])


@dataclass(frozen=True)
class PermutationReport:
    observed: float
    excess: float
    p_value: float
    replicates: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)

    def to_text(self) -> str:
        return "".join(f"{k}: {v!r}\n" for k, v in asdict(self).items())


def _replicate_perms(data: GroupedOutcomes, seed: int, start: int, stop: int) -> np.ndarray:
    perms = np.empty((stop - start, data.n_obs), dtype=np.int64)
    for row, r in enumerate(range(start, stop)):
        keys = np.random.default_rng([seed, r]).random(data.n_obs)
        perms[row] = np.lexsort((keys, data.group_of))
    return perms


def default_workers() -> int:
    return max(1, int(os.environ.get("ALLOCFLOW_THREADS", "1")))


def permutation_test(data: GroupedOutcomes, replicates: int = 1000, seed: int = 0,
                     weighting: str = "pair", workers: int | None = None,
                     chunk: int = 256) -> PermutationReport:
    """Right-tailed permutation test of between-arm differences.

    ``p_value`` is the share of replicates whose statistic is at least the
    observed one; ``excess`` is the observed statistic minus the replicate mean.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    w = data.pair_weights(weighting)
    observed = avg_abs_difference(data, weighting)
    bounds = [(s, min(s + chunk, replicates)) for s in range(0, replicates, chunk)]

    def run(bound):
        return data._stats(_replicate_perms(data, seed, *bound), w)

    workers = workers or default_workers()
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    stats = np.concatenate(parts)
    tol = _TIE_RTOL * max(1.0, abs(observed))
    hits = int(np.count_nonzero(stats >= observed - tol))
    return PermutationReport(
        observed=observed,
        excess=observed - float(stats.mean()),
        p_value=hits / replicates,
        replicates=replicates,
        seed=seed,
    )


def holm_sidak(p_values: Sequence[float]) -> np.ndarray:
    """Step-down Holm-Sidak adjustment of a family of p-values."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj_sorted = 1.0 - (1.0 - p[order]) ** (m - np.arange(m))
    adj_sorted = np.minimum(np.maximum.accumulate(adj_sorted), 1.0)
    out = np.empty(m)
    out[order] = adj_sorted
    return out


@dataclass(frozen=True)
class MechanismReport:
    """Mean outcome per recipient under each allocation mechanism."""

    actual: float
    greedy: float
    optimal: float
    pareto: float
    n_recipients: int
    allocations: dict

    def to_dict(self) -> dict:
        return {"actual": self.actual, "greedy": self.greedy, "optimal": self.optimal,
                "pareto": self.pareto, "n_recipients": self.n_recipients}

    def to_text(self) -> str:
        head = f"{'mechanism':<10}{'mean':>16}\n"
        rows = "".join(f"{k:<10}{getattr(self, k):>16.6f}\n"
                       for k in ("actual", "greedy", "optimal", "pareto"))
        return head + rows + f"{'n':<10}{self.n_recipients:>16d}\n"


def compare_mechanisms(instance: ProblemInstance, actual, order: Sequence[int] | None = None,
                       config: SolverConfig | None = None) -> MechanismReport:
    """Mean outcomes under the actual, greedy, optimal and Pareto-optimal
    allocations.

    Scaled-integer costs can misorder allocations whose values differ by less
    than the quantisation bound; each solver result is therefore replaced by
    any feasible competitor that is strictly better on the real outcomes, so
    actual <= pareto <= optimal and greedy <= optimal always hold.
    """
    actual = as_allocation(actual)
    check_allocation(instance, actual)
    greedy = greedy_allocate(instance, order)
    optimal = solve(instance, config).allocation
    pareto = solve_pareto(instance, actual, config).allocation

    def total(a: Allocation) -> float:
        return allocation_value(instance, a).total

    if total(actual) > total(pareto):
        pareto = actual
    optimal = max((optimal, pareto, greedy, actual), key=total)
    n = instance.n_recipients

    def mean(a: Allocation) -> float:
        return allocation_value(instance, a).mean

    return MechanismReport(mean(actual), mean(greedy), mean(optimal), mean(pareto), n,
                           {"actual": actual, "greedy": greedy, "optimal": optimal,
                            "pareto": pareto})
