"""Minimum-cost feasible flow by cycle canceling, and allocation extraction.

Two rules pick the cycle to cancel:

``bellman_ford``
    any negative cycle, found by Bellman-Ford-Moore relaxation with
    predecessor-graph cycle checks.  The plain reference algorithm.
``min_mean``
    a cycle of minimum mean cost (cost / number of arcs), found with Karp's
    recurrence in exact integer arithmetic.

For layered allocation networks the min-mean search runs on a contracted
graph over treatments (see ``_LayeredSearch``); the cycle it returns is still
a minimum-mean cycle of the full residual network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .model import (
    Allocation,
    AllocationError,
    AllocationValue,
    CostOverflow,
    Infeasible,
    InfeasibleBaseline,
    ProblemInstance,
    allocation_value,
    as_allocation,
    check_allocation,
    feasibility_check,
)
from .network import (
    Flow,
    InfeasibleFlow,
    Network,
    ResidualNetwork,
    _residual_unchecked,
    build_network,
    build_pareto_network,
    extract_allocation,
    flow_cost,
    flow_from_allocation,
    is_feasible,
)

RULES = ("bellman_ford", "min_mean")


class IterationCapExceeded(AllocationError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    rule: str = "min_mean"
    max_iterations: int | None = None
    # contract layered networks before the min-mean search; off = search the
    # full residual network (slow, used for cross-checking)
    layered: bool = True

    def __post_init__(self):
        rule = self.rule.replace("-", "_")
        if rule not in RULES:
            raise ValueError(f"unknown cycle rule {self.rule!r}; expected one of {RULES}")
        object.__setattr__(self, "rule", rule)
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


class CycleTrace(NamedTuple):
    iteration: int
    length: int
    cost: int
    delta: int

    def __str__(self):
        return f"{self.iteration} {self.length} {self.cost} {self.delta}"


@dataclass(frozen=True, eq=False)
class Cycle:
    """A directed cycle of residual arcs, listed in traversal order."""

    arcs: np.ndarray
    vertices: tuple[int, ...]
    cost: int

    @property
    def length(self) -> int:
        return len(self.arcs)

    @property
    def mean(self) -> Fraction:
        return Fraction(self.cost, self.length)


@dataclass(frozen=True, eq=False)
class SolveReport:
    allocation: Allocation
    value: AllocationValue
    iterations: int
    quantization_bound: float
    cost: int
    network: Network = field(repr=False)
    flow: Flow = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "assignment": self.allocation.tolist(),
            "total": self.value.total,
            "mean": self.value.mean,
            "iterations": self.iterations,
            "quantization_bound": self.quantization_bound,
        }


def _make_cycle(res: ResidualNetwork, arcs: np.ndarray) -> Cycle:
    arcs = np.asarray(arcs, dtype=np.int64)
    return Cycle(arcs, tuple(res.tail[arcs].tolist()), int(res.cost[arcs].sum()))


def find_negative_cycle(res: ResidualNetwork) -> Cycle | None:
    """Some cycle of negative total cost, or None if there is none."""
    arcs = _kernels.bellman_ford_cycle(res.vertex_count, res.tail, res.head, res.cost)
    if len(arcs) == 0:
        return None
    return _make_cycle(res, arcs)


def _check_karp_range(n: int, cost: np.ndarray) -> None:
    biggest = int(np.abs(cost).max()) if len(cost) else 0
    # walk costs reach n*biggest, and are cross-multiplied by lengths <= n
    if 2 * biggest * max(n, 1) ** 2 >= 2**63:
        raise CostOverflow(f"costs up to {biggest} on {n} vertices overflow exact mean comparison")


def min_mean_cycle(res: ResidualNetwork) -> tuple[Cycle, Fraction] | None:
    """Minimum-mean cycle and its mean; None for an acyclic graph."""
    _check_karp_range(res.vertex_count, res.cost)
    arcs, num, den = _kernels.karp_min_mean(res.vertex_count, res.tail, res.head, res.cost)
    if len(arcs) == 0:
        return None
    cyc = _make_cycle(res, arcs)
    mean = Fraction(int(num), int(den))
    if cyc.mean != mean:  # pragma: no cover
        raise AssertionError(f"recovered cycle mean {cyc.mean} differs from {mean}")
    return cyc, mean


def find_min_mean_cycle(res: ResidualNetwork) -> Cycle | None:
    """A cycle minimising cost / arc count, or None if that minimum is >= 0."""
    found = min_mean_cycle(res)
    if found is None or found[1] >= 0:
        return None
    return found[0]


class _LayeredSearch:
    """Min-mean cycle search on the residual of a layered allocation network.

    In the residual of an integer feasible flow every recipient has exactly
    one outgoing arc (back to its current treatment), the sink has none, and
    the source is entered only from treatments.  Every cycle therefore
    alternates treatment -> recipient -> treatment or treatment -> source ->
    treatment, two arcs per step.  Collapsing each step to a single "hop"
    between treatments (keeping only the cheapest recipient per treatment
    pair) gives a graph on n1 vertices.  A hop stands for two residual arcs,
    so its minimum mean per hop is exactly twice the minimum mean of the full
    residual and both searches rank cycles identically.
    """

    def __init__(self, net: Network, flow: Flow):
        lay = net.layout
        self.n1, self.n2 = lay.n_treatments, lay.n_recipients
        self.net = net
        pa = lay.pair_arc
        self.allowed = pa >= 0
        self.pair_cost = np.where(self.allowed, net.cost[np.maximum(pa, 0)], 0)
        self.s_lower = net.lower[: self.n1]
        self.s_upper = net.upper[: self.n1]
        self.assign = extract_allocation(net, flow).assignment.copy()
        self.load = np.bincount(self.assign, minlength=self.n1)
        inf = _kernels.INF
        self.hop_cost = np.full((self.n1, self.n1), inf, dtype=np.int64)
        self.hop_via = np.full((self.n1, self.n1), -1, dtype=np.int64)
        for k in range(self.n1):
            self._refresh(k)

    def _refresh(self, k: int) -> None:
        # hop j -> k: some recipient i now on k moves to j; cost c(j,i) - c(k,i)
        members = np.flatnonzero(self.assign == k)
        if len(members) == 0:
            self.hop_cost[:, k] = _kernels.INF
            self.hop_via[:, k] = -1
            return
        pc = self.pair_cost[members]
        vals = pc - pc[:, k][:, None]
        vals[~self.allowed[members]] = _kernels.INF
        vals[:, k] = _kernels.INF
        best = vals.argmin(axis=0)
        cost = vals[best, np.arange(self.n1)]
        self.hop_cost[:, k] = cost
        self.hop_via[:, k] = np.where(cost < _kernels.INF, members[best], -1)

    def next_cycle(self):
        """Hops of a minimum-mean cycle as (from, to, recipient or -1), plus its
        cost; None when no negative cycle is left."""
        inf = _kernels.INF
        w = self.hop_cost.copy()
        via = self.hop_via.copy()
        s_hop = ((self.load > self.s_lower)[:, None] & (self.load < self.s_upper)[None, :])
        np.fill_diagonal(s_hop, False)
        use_s = s_hop & (w > 0)
        w[use_s] = 0
        via[use_s] = -1
        tail, head = np.nonzero(w < inf)
        if len(tail) == 0:
            return None
        cost = w[tail, head]
        _check_karp_range(self.n1, cost)
        arcs, num, den = _kernels.karp_min_mean(self.n1, tail, head, cost)
        if len(arcs) == 0 or num >= 0:
            return None
        hops = [(int(tail[a]), int(head[a]), int(via[tail[a], head[a]])) for a in arcs]
        total = int(cost[arcs].sum())
        s_pos = [p for p, h in enumerate(hops) if h[2] < 0]
        if len(s_pos) > 1:
            # closed walk through the source more than once; every piece
            # between source visits has the same (minimum) mean, keep the first
            hops = hops[s_pos[0]:s_pos[1]]
            total = sum(int(w[a, b]) for a, b, _ in hops)
        if total * int(den) != int(num) * len(hops):  # pragma: no cover
            raise AssertionError("layered cycle mean mismatch")
        return hops, total

    def apply(self, hops) -> None:
        touched = set()
        for j, k, i in hops:
            if i >= 0:
                self.assign[i] = j
            touched.update((j, k))
        self.load = np.bincount(self.assign, minlength=self.n1)
        for k in touched:
            self._refresh(k)

    def flow(self) -> Flow:
        return flow_from_allocation(self.net, self.assign)


def _cap_check(config: SolverConfig, iterations: int) -> None:
    if config.max_iterations is not None and iterations >= config.max_iterations:
        raise IterationCapExceeded(f"no optimum after {iterations} canceled cycles")


def cancel_cycles(net: Network, start: Flow, config: SolverConfig | None = None,
                  trace: Callable[[CycleTrace], None] | None = None) -> tuple[Flow, int]:
    """Cancel negative residual cycles until none is left.

    Returns the optimal flow and the number of cycles canceled.  ``trace``, if
    given, is called once per canceled cycle.
    """
    config = config or SolverConfig()
    if not is_feasible(net, start):
        raise InfeasibleFlow("cycle canceling needs a feasible starting flow")
    if config.rule == "min_mean" and config.layered and net.layout is not None:
        return _cancel_layered(net, start, config, trace)

    search = find_negative_cycle if config.rule == "bellman_ford" else find_min_mean_cycle
    x = start.values.copy()
    iterations = 0
    while True:
        res = _residual_unchecked(net, x)
        cyc = search(res)
        if cyc is None:
            return Flow(x), iterations
        _cap_check(config, iterations)
        delta = int(res.capacity[cyc.arcs].min())
        np.add.at(x, res.origin[cyc.arcs], delta * res.direction[cyc.arcs])
        iterations += 1
        if trace is not None:
            trace(CycleTrace(iterations, cyc.length, cyc.cost, delta))


def _cancel_layered(net, start, config, trace):
    search = _LayeredSearch(net, start)
    iterations = 0
    while True:
        found = search.next_cycle()
        if found is None:
            return search.flow(), iterations
        _cap_check(config, iterations)
        hops, cost = found
        search.apply(hops)
        iterations += 1
        if trace is not None:
            trace(CycleTrace(iterations, 2 * len(hops), cost, 1))


def initial_feasible_flow(net: Network) -> Flow:
    """Fill treatments in index order: each recipient takes the lowest-indexed
    treatment that still has capacity (and an arc to it)."""
    if net.layout is None:
        raise ValueError("network has no treatment/recipient layout")
    lay = net.layout
    caps = net.upper[: lay.n_treatments]
    if int(caps.sum()) < lay.n_recipients:
        raise Infeasible(
            f"total capacity {int(caps.sum())} < {lay.n_recipients} recipients")
    if np.all(lay.pair_arc >= 0):
        assign = np.repeat(np.arange(lay.n_treatments), caps)[: lay.n_recipients]
    else:
        remaining = caps.copy()
        assign = np.empty(lay.n_recipients, dtype=np.int64)
        for i in range(lay.n_recipients):
            open_ = np.flatnonzero((remaining > 0) & (lay.pair_arc[i] >= 0))
            if len(open_) == 0:
                raise Infeasible(f"no treatment with spare capacity reaches recipient {i}")
            assign[i] = open_[0]
            remaining[open_[0]] -= 1
    return flow_from_allocation(net, assign)


def _report(instance: ProblemInstance, net: Network, flow: Flow, iterations: int) -> SolveReport:
    alloc = extract_allocation(net, flow)
    return SolveReport(
        allocation=alloc,
        value=allocation_value(instance, alloc),
        iterations=iterations,
        quantization_bound=instance.n_recipients / instance.cost_scale,
        cost=flow_cost(net, flow),
        network=net,
        flow=flow,
    )


def solve(instance: ProblemInstance, config: SolverConfig | None = None,
          trace: Callable[[CycleTrace], None] | None = None) -> SolveReport:
    """Optimal allocation of ``instance`` (maximum total outcome)."""
    if not feasibility_check(instance):
        raise Infeasible(
            f"total capacity {int(instance.capacities.sum())} < "
            f"{instance.n_recipients} recipients")
    net = build_network(instance)
    flow, iterations = cancel_cycles(net, initial_feasible_flow(net), config, trace)
    return _report(instance, net, flow, iterations)


def solve_pareto(instance: ProblemInstance, baseline, config: SolverConfig | None = None,
                 trace: Callable[[CycleTrace], None] | None = None) -> SolveReport:
    """Best allocation that leaves nobody worse off than under ``baseline``."""
    baseline = as_allocation(baseline)
    try:
        check_allocation(instance, baseline)
    except AllocationError as exc:
        raise InfeasibleBaseline(str(exc)) from exc
    net = build_pareto_network(instance, baseline)
    flow, iterations = cancel_cycles(net, flow_from_allocation(net, baseline), config, trace)
    return _report(instance, net, flow, iterations)
