"""Layered flow network for an allocation instance, flows over it, and residuals.

Vertex layout: ``0`` is the source, ``1..n1`` the treatments, ``n1+1..n1+n2``
the recipients and ``n1+n2+1`` the sink.  Arcs are stored column-wise in
canonical order: source->treatment ascending by treatment, then
treatment->recipient ascending by (treatment, recipient), then
recipient->sink ascending by recipient.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import (
    Allocation,
    AllocationError,
    IndexOutOfRange,
    InfeasibleBaseline,
    ProblemInstance,
    as_allocation,
    check_allocation,
)


class InfeasibleFlow(AllocationError):
    pass


class MalformedFlow(AllocationError):
    pass


class Arc(NamedTuple):
    tail: int
    head: int
    lower: int
    upper: int
    cost: int


@dataclass(frozen=True, eq=False)
class Layout:
    """Where treatments and recipients live inside a layered network.

    ``pair_arc[i, j]`` is the index of the arc treatment j -> recipient i, or -1
    when that arc was removed.
    """

    n_treatments: int
    n_recipients: int
    pair_arc: np.ndarray

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n_treatments + self.n_recipients + 1

    def treatment_vertex(self, j):
        return 1 + j

    def recipient_vertex(self, i):
        return 1 + self.n_treatments + i


@dataclass(frozen=True, eq=False)
class Network:
    vertex_count: int
    tail: np.ndarray
    head: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    balance: np.ndarray
    layout: Layout | None = None

    def __post_init__(self):
        for name in ("tail", "head", "lower", "upper", "cost", "balance"):
            arr = np.array(getattr(self, name), dtype=np.int64).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = len(self.tail)
        if not all(len(a) == m for a in (self.head, self.lower, self.upper, self.cost)):
            raise ValueError("arc arrays differ in length")
        if len(self.balance) != self.vertex_count:
            raise ValueError("balance vector must have one entry per vertex")
        if m and (min(self.tail.min(), self.head.min()) < 0
                  or max(self.tail.max(), self.head.max()) >= self.vertex_count):
            raise IndexOutOfRange("arc endpoint outside vertex range")
        if np.any(self.lower > self.upper) or np.any(self.lower < 0):
            raise ValueError("every arc needs 0 <= lower <= upper")
        if int(self.balance.sum()) != 0:
            raise ValueError("balances must sum to zero")

    @property
    def arc_count(self) -> int:
        return len(self.tail)

    @property
    def arcs(self) -> list[Arc]:
        return [Arc(*map(int, row)) for row in
                zip(self.tail, self.head, self.lower, self.upper, self.cost)]

    def zero_flow(self) -> "Flow":
        return Flow(np.zeros(self.arc_count, dtype=np.int64))


@dataclass(eq=False)
class Flow:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.int64).reshape(-1)
        if np.any(self.values < 0):
            raise ValueError("flow values must be non-negative")

    def copy(self) -> "Flow":
        return Flow(self.values.copy())

    def __eq__(self, other):
        if not isinstance(other, Flow):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class ResidualNetwork:
    """Residual arcs of a flow.

    ``origin[k]`` names the network arc that residual arc ``k`` came from and
    ``direction[k]`` is +1 for forward (push more) or -1 for backward (cancel).
    Hand-built residual graphs may omit both.
    """

    vertex_count: int
    tail: np.ndarray
    head: np.ndarray
    capacity: np.ndarray
    cost: np.ndarray
    origin: np.ndarray | None = None
    direction: np.ndarray | None = None

    def __post_init__(self):
        m = len(np.asarray(self.tail))
        if self.origin is None:
            object.__setattr__(self, "origin", np.full(m, -1))
        if self.direction is None:
            object.__setattr__(self, "direction", np.ones(m))
        for name in ("tail", "head", "capacity", "cost", "origin", "direction"):
            arr = np.array(getattr(self, name), dtype=np.int64).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def arc_count(self) -> int:
        return len(self.tail)


def _check_cost_range(costs: np.ndarray, n_units: int) -> None:
    biggest = int(np.abs(costs).max()) if costs.size else 0
    if biggest * max(n_units, 1) >= 2**62:
        from .model import CostOverflow
        raise CostOverflow(f"arc costs up to {biggest} overflow int64 over {n_units} units")


def _layered(instance: ProblemInstance, keep: np.ndarray) -> Network:
    n1, n2 = instance.n_treatments, instance.n_recipients
    costs = instance.scaled_costs  # n2 x n1
    # treatment-major order (j, i)
    js, is_ = np.nonzero(keep.T)
    n_pair = len(js)
    src, snk = 0, n1 + n2 + 1
    tail = np.concatenate([np.zeros(n1, np.int64), 1 + js, 1 + n1 + np.arange(n2)])
    head = np.concatenate([1 + np.arange(n1), 1 + n1 + is_, np.full(n2, snk)])
    lower = np.concatenate([np.zeros(n1 + n_pair, np.int64), np.ones(n2, np.int64)])
    upper = np.concatenate([instance.capacities, np.ones(n_pair + n2, np.int64)])
    cost = np.concatenate([np.zeros(n1, np.int64), -costs[is_, js], np.zeros(n2, np.int64)])
    _check_cost_range(cost, n2)
    balance = np.zeros(n1 + n2 + 2, np.int64)
    balance[src] = n2
    balance[snk] = -n2
    pair_arc = np.full((n2, n1), -1, dtype=np.int64)
    pair_arc[is_, js] = n1 + np.arange(n_pair)
    pair_arc.setflags(write=False)
    return Network(n1 + n2 + 2, tail, head, lower, upper, cost, balance,
                   Layout(n1, n2, pair_arc))


def build_network(instance: ProblemInstance) -> Network:
    """Layered network whose integer feasible flows are exactly the allocations."""
    keep = np.ones((instance.n_recipients, instance.n_treatments), dtype=bool)
    return _layered(instance, keep)


def pareto_mask(instance: ProblemInstance, baseline: Allocation) -> np.ndarray:
    """Boolean (recipients x treatments) mask of arcs kept in the Pareto network."""
    y = instance.outcomes
    base = y[np.arange(instance.n_recipients), baseline.assignment]
    return y >= base[:, None]


def build_pareto_network(instance: ProblemInstance, baseline) -> Network:
    """Drop every treatment->recipient arc that would leave that recipient worse
    off than under ``baseline``.  Arcs matching the baseline outcome stay."""
    baseline = as_allocation(baseline)
    try:
        check_allocation(instance, baseline)
    except AllocationError as exc:
        raise InfeasibleBaseline(str(exc)) from exc
    return _layered(instance, pareto_mask(instance, baseline))


def _check_sized(net: Network, flow: Flow) -> None:
    if len(flow.values) != net.arc_count:
        raise ValueError(
            f"flow has {len(flow.values)} entries, network has {net.arc_count} arcs")


def balances(net: Network, flow: Flow) -> np.ndarray:
    """Outflow minus inflow at every vertex."""
    _check_sized(net, flow)
    x = flow.values
    return (np.bincount(net.tail, weights=x, minlength=net.vertex_count)
            - np.bincount(net.head, weights=x, minlength=net.vertex_count)).astype(np.int64)


def balance_vector(net: Network, flow: Flow, v: int) -> int:
    if not 0 <= v < net.vertex_count:
        raise IndexOutOfRange(f"vertex {v} not in network with {net.vertex_count} vertices")
    _check_sized(net, flow)
    x = flow.values
    return int(x[net.tail == v].sum() - x[net.head == v].sum())


def is_feasible(net: Network, flow: Flow) -> bool:
    _check_sized(net, flow)
    x = flow.values
    if np.any(x < net.lower) or np.any(x > net.upper):
        return False
    return bool(np.array_equal(balances(net, flow), net.balance))


def flow_cost(net: Network, flow: Flow) -> int:
    _check_sized(net, flow)
    return int(np.dot(net.cost, flow.values))


def residual(net: Network, flow: Flow) -> ResidualNetwork:
    if not is_feasible(net, flow):
        raise InfeasibleFlow("residual network requested for an infeasible flow")
    return _residual_unchecked(net, flow.values)


def _residual_unchecked(net: Network, x: np.ndarray) -> ResidualNetwork:
    fwd = np.nonzero(x < net.upper)[0]
    bwd = np.nonzero(x > net.lower)[0]
    return ResidualNetwork(
        net.vertex_count,
        tail=np.concatenate([net.tail[fwd], net.head[bwd]]),
        head=np.concatenate([net.head[fwd], net.tail[bwd]]),
        capacity=np.concatenate([net.upper[fwd] - x[fwd], x[bwd] - net.lower[bwd]]),
        cost=np.concatenate([net.cost[fwd], -net.cost[bwd]]),
        origin=np.concatenate([fwd, bwd]),
        direction=np.concatenate([np.ones(len(fwd), np.int64), -np.ones(len(bwd), np.int64)]),
    )


def flow_from_allocation(net: Network, alloc) -> Flow:
    """Integer flow routing each recipient through its assigned treatment."""
    if net.layout is None:
        raise ValueError("network has no treatment/recipient layout")
    lay = net.layout
    a = as_allocation(alloc).assignment
    if len(a) != lay.n_recipients:
        raise IndexOutOfRange("allocation length does not match recipients")
    if len(a) and (a.min() < 0 or a.max() >= lay.n_treatments):
        raise IndexOutOfRange("treatment index out of range")
    arcs = lay.pair_arc[np.arange(lay.n_recipients), a]
    if np.any(arcs < 0):
        i = int(np.argmax(arcs < 0))
        raise InfeasibleFlow(f"recipient {i} cannot be routed through treatment {a[i]}")
    x = np.zeros(net.arc_count, dtype=np.int64)
    x[:lay.n_treatments] = np.bincount(a, minlength=lay.n_treatments)
    x[arcs] = 1
    x[net.arc_count - lay.n_recipients:] = 1
    return Flow(x)


def extract_allocation(net: Network, flow: Flow) -> Allocation:
    """Read off, for every recipient, the treatment whose arc carries its unit."""
    if net.layout is None:
        raise ValueError("network has no treatment/recipient layout")
    _check_sized(net, flow)
    lay = net.layout
    pa = lay.pair_arc
    carried = np.where(pa >= 0, flow.values[np.maximum(pa, 0)], 0)
    per_recipient = carried.sum(axis=1)
    if np.any(per_recipient != 1) or np.any(carried > 1):
        i = int(np.argmax((per_recipient != 1) | (carried > 1).any(axis=1)))
        raise MalformedFlow(f"recipient {i} receives {per_recipient[i]} units")
    return Allocation(np.argmax(carried, axis=1) if lay.n_recipients else [])


def to_dimacs(net: Network) -> str:
    """DIMACS min-cost-flow text (1-based vertices).

    ``n v b`` lines carry balances (positive = supply); ``a u v low cap cost``
    lines carry arcs in network order.
    """
    out = io.StringIO()
    out.write("c allocation network\n")
    out.write(f"p min {net.vertex_count} {net.arc_count}\n")
    for v, b in enumerate(net.balance.tolist()):
        out.write(f"n {v + 1} {b}\n")
    for t, h, lo, up, c in zip(net.tail.tolist(), net.head.tolist(), net.lower.tolist(),
                               net.upper.tolist(), net.cost.tolist()):
        out.write(f"a {t + 1} {h + 1} {lo} {up} {c}\n")
    return out.getvalue()


def from_dimacs(text: str) -> Network:
    n_vertices = None
    balance = None
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        kind = parts[0]
        if kind == "p":
            if len(parts) != 4 or parts[1] != "min":
                raise ValueError(f"line {lineno}: bad problem line")
            n_vertices = int(parts[2])
            balance = np.zeros(n_vertices, np.int64)
        elif kind == "n":
            if balance is None:
                raise ValueError(f"line {lineno}: node line before problem line")
            balance[int(parts[1]) - 1] = int(parts[2])
        elif kind == "a":
            t, h, lo, up, c = (int(p) for p in parts[1:6])
            arcs.append((t - 1, h - 1, lo, up, c))
        else:
            raise ValueError(f"line {lineno}: unknown descriptor {kind!r}")
    if n_vertices is None:
        raise ValueError("missing problem line")
    cols = np.array(arcs, dtype=np.int64).reshape(-1, 5)
    return Network(n_vertices, cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3],
                   cols[:, 4], balance)
