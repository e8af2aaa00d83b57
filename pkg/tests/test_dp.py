import pytest

from minimaxdp import MemoryGraph, Strategy, worst_case_cost
from minimaxdp.dp import evaluate_strategy, root_values, solve_memory_terminal_dp, solve_specialized_dp
from minimaxdp.problem import desk1_document, spec_from_dict

import oracles


def test_desk1_values(desk):
    g = MemoryGraph(desk)
    tm = solve_memory_terminal_dp(desk, g)
    sp = solve_specialized_dp(desk, g)
    assert root_values(tm, g) == root_values(sp, g) == {0: 0, 1: 2}


def test_zero_costs_give_zero_values():
    doc = desk1_document()
    for rec in doc["cost"]:
        rec["output"] = "0"
    spec = spec_from_dict(doc)
    g = MemoryGraph(spec)
    assert set(root_values(solve_specialized_dp(spec, g), g).values()) == {0}


def test_memory_dp_matches_strategy_enumeration(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        tm = solve_memory_terminal_dp(spec, g)
        for y0, i in g.root_index.items():
            assert tm.V[0][i] == oracles.brute_optimal(spec, y0), spec.name


def test_greedy_law_achieves_its_value(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        sp = solve_specialized_dp(spec, g)
        law = {m: sp.law[t][i] for t, ms in enumerate(g.memories) for i, m in enumerate(ms)}
        for y0, i in g.root_index.items():
            assert worst_case_cost(spec, Strategy(law), y0) == sp.V[0][i]


def test_terminal_and_specialized_differ_by_max_accrued(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        tm = solve_memory_terminal_dp(spec, g)
        sp = solve_specialized_dp(spec, g)
        for t, ms in enumerate(g.memories):
            for i, m in enumerate(ms):
                amax = max(a for _, a in oracles.brute_joint_range(spec, m))
                for u in range(len(spec.U)):
                    assert tm.Q[t][i][u] == sp.Q[t][i][u] + amax


def test_evaluating_the_optimal_law_reproduces_values(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        sp = solve_specialized_dp(spec, g)
        ev = evaluate_strategy(spec, g, lambda t, m: sp.law[t][g.index[t][m]])
        assert ev.V == sp.V


def test_value_table_lookup(desk):
    g = MemoryGraph(desk)
    sp = solve_specialized_dp(desk, g)
    m = g.memories[0][1]
    assert sp.value(0, m) == 2
    assert sp.action(0, m) == sp.law[0][1]
    with pytest.raises(KeyError):
        sp.value(0, "nope")
