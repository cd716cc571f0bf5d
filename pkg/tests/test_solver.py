from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from allocflow import (
    Infeasible,
    InfeasibleBaseline,
    IterationCapExceeded,
    ProblemInstance,
    ResidualNetwork,
    SolverConfig,
    build_network,
    build_pareto_network,
    cancel_cycles,
    extract_allocation,
    find_min_mean_cycle,
    find_negative_cycle,
    flow_cost,
    flow_from_allocation,
    initial_feasible_flow,
    is_feasible,
    residual,
    solve,
    solve_pareto,
)
from allocflow.solver import _LayeredSearch, min_mean_cycle

from conftest import optimal_set, random_baseline, random_small_instance, small_instances

ALL_CONFIGS = [
    SolverConfig("min_mean"),
    SolverConfig("min_mean", layered=False),
    SolverConfig("bellman_ford"),
]
CONFIG_IDS = ["min_mean", "min_mean_generic", "bellman_ford"]

SWAP = ProblemInstance([[5, 4], [5, 1]], [1, 1], cost_scale=1)


def _res(n, arcs):
    t, h, c = zip(*arcs) if arcs else ((), (), ())
    return ResidualNetwork(n, np.array(t, dtype=np.int64), np.array(h, dtype=np.int64),
                           np.ones(len(arcs), dtype=np.int64), np.array(c, dtype=np.int64))


# ---------------------------------------------------------- cycle searches


def test_negative_cycle_two_arcs():
    cyc = find_negative_cycle(_res(2, [(0, 1, 1), (1, 0, -3)]))
    assert cyc.cost == -2 and cyc.length == 2


def test_no_cycle_in_dag():
    dag = _res(3, [(0, 1, -5), (1, 2, -5), (0, 2, -1)])
    assert find_negative_cycle(dag) is None
    assert find_min_mean_cycle(dag) is None


def test_min_mean_prefers_lower_mean():
    g = _res(4, [(0, 1, -2), (1, 0, -2), (2, 3, -1), (3, 2, -1)])
    cyc = find_min_mean_cycle(g)
    assert cyc.mean == -2 and set(cyc.vertices) == {0, 1}


def test_min_mean_none_when_costs_positive():
    assert find_min_mean_cycle(_res(2, [(0, 1, 1), (1, 0, 0)])) is None


def test_min_mean_cycle_reports_nonnegative_mean():
    cyc, mean = min_mean_cycle(_res(2, [(0, 1, 3), (1, 0, 0)]))
    assert mean == Fraction(3, 2) and cyc.mean == mean


def test_mean_is_diluted_by_length():
    # triangle with cost -3 (mean -1) versus 2-cycle with cost -1 (mean -1/2)
    g = _res(5, [(0, 1, -1), (1, 2, -1), (2, 0, -1), (3, 4, 0), (4, 3, -1)])
    assert find_min_mean_cycle(g).mean == -1


@pytest.mark.parametrize("cfg", [SolverConfig("bellman_ford"), SolverConfig("min_mean")],
                         ids=["bellman_ford", "min_mean"])
def test_residual_of_optimal_flow_has_no_negative_cycle(cfg):
    rng = np.random.default_rng(3)
    for _ in range(100):
        inst = random_small_instance(rng)
        report = solve(inst, cfg)
        res = residual(report.network, report.flow)
        assert find_negative_cycle(res) is None
        assert find_min_mean_cycle(res) is None


# ------------------------------------------------------ initial flow


def test_initial_flow_round_robin():
    net = build_network(ProblemInstance(np.zeros((2, 2)), [1, 1]))
    assert extract_allocation(net, initial_feasible_flow(net)).tolist() == [0, 1]
    net = build_network(ProblemInstance(np.zeros((3, 1)), [3]))
    assert extract_allocation(net, initial_feasible_flow(net)).tolist() == [0, 0, 0]
    net = build_network(ProblemInstance(np.zeros((2, 1)), [2]))
    assert extract_allocation(net, initial_feasible_flow(net)).tolist() == [0, 0]


def test_initial_flow_skips_zero_capacity():
    net = build_network(ProblemInstance(np.zeros((3, 3)), [0, 2, 1]))
    assert extract_allocation(net, initial_feasible_flow(net)).tolist() == [1, 1, 2]


def test_initial_flow_infeasible():
    net = build_network(ProblemInstance(np.zeros((2, 1)), [1]))
    with pytest.raises(Infeasible):
        initial_feasible_flow(net)


def test_initial_flow_on_forced_pareto_network():
    # every recipient strictly prefers its baseline treatment
    inst = ProblemInstance([[9, 0, 0], [0, 9, 0], [0, 0, 9]], [1, 1, 1])
    net = build_pareto_network(inst, [0, 1, 2])
    flow = initial_feasible_flow(net)
    assert is_feasible(net, flow)
    assert flow == flow_from_allocation(net, [0, 1, 2])


# ------------------------------------------------------ cycle canceling


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=CONFIG_IDS)
def test_one_cycle_turns_6_into_9(cfg):
    net = build_network(SWAP)
    out, iters = cancel_cycles(net, flow_from_allocation(net, [0, 1]), cfg)
    assert iters == 1
    assert extract_allocation(net, out).tolist() == [1, 0]
    assert flow_cost(net, out) == -9


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=CONFIG_IDS)
def test_optimal_start_returned_unchanged(cfg):
    net = build_network(SWAP)
    start = flow_from_allocation(net, [1, 0])
    out, iters = cancel_cycles(net, start, cfg)
    assert iters == 0 and out == start


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=CONFIG_IDS)
def test_cost_strictly_decreases(cfg):
    rng = np.random.default_rng(5)
    for _ in range(40):
        inst = random_small_instance(rng, max_n1=5, max_n2=10, max_cap=4)
        net = build_network(inst)
        start = initial_feasible_flow(net)
        costs = [flow_cost(net, start)]
        trace = []
        out, iters = cancel_cycles(net, start, cfg, trace.append)
        assert len(trace) == iters
        for ev in trace:
            assert ev.cost < 0 and ev.delta >= 1
            costs.append(costs[-1] + ev.cost * ev.delta)
        assert costs[-1] == flow_cost(net, out)
        assert all(b < a for a, b in zip(costs, costs[1:]))


def test_iteration_cap():
    net = build_network(SWAP)
    with pytest.raises(IterationCapExceeded):
        cancel_cycles(net, flow_from_allocation(net, [0, 1]), SolverConfig(max_iterations=0))
    out, iters = cancel_cycles(net, flow_from_allocation(net, [0, 1]),
                               SolverConfig(max_iterations=1))
    assert iters == 1


def test_config_validation():
    assert SolverConfig("min-mean").rule == "min_mean"
    with pytest.raises(ValueError):
        SolverConfig("simplex")
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=-1)


def test_layered_search_matches_generic_min_mean():
    # the first cycle found by the contracted search has the same mean as
    # Karp on the full residual graph
    rng = np.random.default_rng(8)
    for _ in range(400):
        inst = random_small_instance(rng, max_n1=5, max_n2=8, max_cap=3)
        start_alloc = random_baseline(rng, inst)
        if rng.random() < 0.5:
            net = build_pareto_network(inst, start_alloc)
        else:
            net = build_network(inst)
        start = flow_from_allocation(net, start_alloc)
        found = _LayeredSearch(net, start).next_cycle()
        full = min_mean_cycle(residual(net, start))
        if found is None:
            assert full is None or full[1] >= 0
        else:
            hops, cost = found
            assert full is not None
            assert Fraction(cost, 2 * len(hops)) == full[1]


# ------------------------------------------------------ solve


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=CONFIG_IDS)
def test_solve_examples(cfg):
    r = solve(ProblemInstance([[5, 1], [1, 5]], [1, 1], cost_scale=1), cfg)
    assert r.allocation.tolist() == [0, 1] and r.value.total == 10
    r = solve(SWAP, cfg)
    assert r.allocation.tolist() == [1, 0] and r.value.total == 9
    r = solve(ProblemInstance([[-2.5]], [1]), cfg)
    assert r.allocation.tolist() == [0] and r.value.total == -2.5 and r.iterations >= 0


def test_solve_infeasible():
    with pytest.raises(Infeasible):
        solve(ProblemInstance([[1.0], [2.0]], [1]))


def test_solve_empty_instance():
    r = solve(ProblemInstance(np.zeros((0, 2)), [0, 0]))
    assert r.allocation.tolist() == [] and r.value.total == 0


def test_report_dict():
    d = solve(SWAP).to_dict()
    assert d["assignment"] == [1, 0] and d["total"] == 9 and d["mean"] == 4.5
    assert d["quantization_bound"] == 2.0


@settings(max_examples=150, deadline=None)
@given(small_instances())
def test_solve_matches_enumeration_all_rules(inst):
    best, argset = optimal_set(inst)
    best = 0 if best is None else best
    costs = set()
    for cfg in ALL_CONFIGS:
        r = solve(inst, cfg)
        assert r.value.total == best
        assert tuple(r.allocation.tolist()) in argset or inst.n_recipients == 0
        assert np.issubdtype(r.flow.values.dtype, np.integer)
        costs.add(r.cost)
    assert len(costs) == 1


def test_quantization_bound_holds():
    rng = np.random.default_rng(21)
    for _ in range(200):
        n1 = int(rng.integers(1, 4))
        caps = rng.integers(1, 4, n1)
        n2 = int(rng.integers(1, min(6, caps.sum()) + 1))
        y = rng.normal(size=(n2, n1)) * 1e-3
        inst = ProblemInstance(y, caps, cost_scale=1000)
        r = solve(inst)
        best, _ = optimal_set(inst)
        assert best - r.value.total <= r.quantization_bound + 1e-12


# ------------------------------------------------------ pareto


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=CONFIG_IDS)
def test_pareto_examples(cfg):
    r = solve_pareto(SWAP, [0, 1], cfg)
    assert r.allocation.tolist() == [0, 1] and r.value.total == 6
    r = solve_pareto(SWAP, [1, 0], cfg)
    assert r.allocation.tolist() == [1, 0] and r.value.total == 9


def test_pareto_bad_baseline():
    with pytest.raises(InfeasibleBaseline):
        solve_pareto(SWAP, [0, 0])
    with pytest.raises(InfeasibleBaseline):
        solve_pareto(SWAP, [0, 5])


@settings(max_examples=150, deadline=None)
@given(small_instances())
def test_pareto_matches_enumeration(inst):
    rng = np.random.default_rng(inst.n_recipients * 7 + inst.n_treatments)
    base = random_baseline(rng, inst)
    y = inst.outcomes
    allowed = [[y[i][j] >= y[i][base[i]] for j in range(inst.n_treatments)]
               for i in range(inst.n_recipients)]
    best, argset = optimal_set(inst, allowed)
    best = 0 if best is None else best
    unconstrained = solve(inst).value.total
    base_total = sum(y[i][base[i]] for i in range(inst.n_recipients))
    for cfg in ALL_CONFIGS:
        r = solve_pareto(inst, base, cfg)
        assert r.value.total == best
        a = r.allocation.tolist()
        assert all(y[i][a[i]] >= y[i][base[i]] for i in range(inst.n_recipients))
        assert base_total <= r.value.total <= unconstrained


def test_pareto_from_optimum_keeps_value():
    rng = np.random.default_rng(4)
    for _ in range(50):
        inst = random_small_instance(rng)
        opt = solve(inst)
        r = solve_pareto(inst, opt.allocation)
        assert r.value.total == opt.value.total
