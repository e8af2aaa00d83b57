import json

import pytest

from minimaxdp import (
    ConditioningError,
    Memory,
    MemoryGraph,
    SpecError,
    Strategy,
    StrategyIncompleteError,
    conditional_accrued,
    enumerate_memories,
    joint_range,
    pushforward,
    simulate,
    transition_accrued,
    worst_case_cost,
)
from minimaxdp.distributions import condition
from minimaxdp.problem import desk1_document, load_problem, spec_from_dict
from minimaxdp.system import estimate_memory_counts

import oracles


def test_desk1_shape(desk):
    assert desk.T == 1
    assert list(map(len, (desk.X, desk.U, desk.Y, desk.W, desk.N))) == [2, 2, 2, 1, 2]
    assert desk.root_observations() == [0, 1]


def test_simulate_accrues_stage_costs(desk):
    tr = simulate(desk, lambda m: 1, 0, [0], [0, 0])
    # a -r-> b, then c_1(b, r) = 1
    assert tr.states == (0, 1)
    assert tr.accrued == (0, 2, 3)
    for t in range(desk.T + 1):
        assert tr.accrued[t + 1] - tr.accrued[t] == desk.cost[t][tr.states[t]][tr.actions[t]]


def test_simulate_zero_costs_and_single_stage():
    doc = desk1_document()
    for rec in doc["cost"]:
        rec["output"] = "0"
    spec = spec_from_dict(doc)
    assert worst_case_cost(spec, lambda m: 0) == 0
    doc = desk1_document()
    doc["horizon"] = 0
    doc["cost"] = [r for r in doc["cost"] if r["t"] == 0]
    doc["dynamics"] = []
    spec = spec_from_dict(doc)
    tr = simulate(spec, lambda m: 1, 1, [], [0])
    assert tr.total == spec.cost[0][1][1] == 0


def test_strategy_incomplete(desk):
    g = Strategy({Memory.root(0): 0})
    with pytest.raises(StrategyIncompleteError):
        simulate(desk, g, 0, [0], [0, 0])


def test_worst_case_singleton_inputs():
    doc = desk1_document()
    doc["initial_range"] = ["a"]
    doc["spaces"]["N"] = {"points": ["n0"]}
    doc["observation"] = [{"x": "a", "output": "p"}, {"x": "b", "output": "q"}]
    spec = spec_from_dict(doc)
    g = lambda m: 0  # noqa: E731
    assert worst_case_cost(spec, g) == simulate(spec, g, 0, [0], [0, 0]).total


def test_memories_match_trajectory_projection(small_family):
    for spec in small_family:
        for t in range(spec.T + 1):
            assert set(enumerate_memories(spec, t)) == oracles.brute_memories(spec, t), spec.name
        assert estimate_memory_counts(spec) == MemoryGraph(spec).counts()


def test_root_memories(desk):
    assert enumerate_memories(desk, 0) == [Memory.root(0), Memory.root(1)]


def test_joint_range_and_accrued_match_brute_force(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        for t, ms in enumerate(g.memories):
            for i, m in enumerate(ms):
                pairs = oracles.brute_joint_range(spec, m)
                assert joint_range(spec, m) == pairs
                r = conditional_accrued(spec, m)
                assert dict(r) == oracles.brute_accrued(spec, m)
                assert max(r.values()) == 0
                assert g.max_accrued(t, i) == max(a for _, a in pairs)


def test_initial_accrued_is_indicator(small_family):
    for spec in small_family:
        for m in enumerate_memories(spec, 0):
            r = conditional_accrued(spec, m)
            rng = {x for x in spec.initial_range if m.observations[0] in spec.observable[0][x]}
            assert dict(r) == {x: 0 for x in rng}


def test_action_only_costs_give_indicator(action_only_family):
    for spec in action_only_family:
        for t in range(spec.T + 1):
            for m in enumerate_memories(spec, t):
                assert set(conditional_accrued(spec, m).values()) == {0}


def test_transition_marginal_reproduces_next_accrued(small_family):
    for spec in small_family:
        g = MemoryGraph(spec)
        for t in range(spec.T):
            for m in g.memories[t]:
                for u in range(len(spec.U)):
                    J = transition_accrued(spec, m, u)
                    nxt = pushforward(J, lambda p: p[1])
                    for m2 in nxt:
                        # conditioning the joint on m2 gives the parent-stage
                        # distribution restricted to states that can emit y'
                        cond = condition(J, m2)
                        assert set(cond) <= set(conditional_accrued(spec, m))
                        assert m2 in g.index[t + 1]


def test_transition_deterministic_single_pair():
    doc = desk1_document()
    doc["initial_range"] = ["a"]
    doc["spaces"]["N"] = {"points": ["n0"]}
    doc["observation"] = [{"x": "a", "output": "p"}, {"x": "b", "output": "q"}]
    spec = spec_from_dict(doc)
    J = transition_accrued(spec, Memory.root(0), 0)
    assert dict(J) == {(0, Memory((0, 0), (0,))): 0}


def test_infeasible_memory(desk):
    with pytest.raises(ConditioningError):
        conditional_accrued(desk, Memory((0, 0), (1,)))


def test_problem_file_roundtrip(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps(desk1_document()))
    spec = load_problem(p).spec
    assert spec.cost[1][0][0] == 3


def test_problem_totality_names_missing_index():
    doc = desk1_document()
    doc["cost"] = doc["cost"][:-1]
    with pytest.raises(SpecError, match="t=1 x='b' u='r'"):
        spec_from_dict(doc)


def test_problem_metric_violation_reported():
    doc = desk1_document()
    doc["spaces"]["X"] = {"points": ["a", "b"], "metric": "explicit", "distances": [["0", "1"], ["2", "0"]]}
    with pytest.raises(SpecError, match="space 'X'.*asymmetric"):
        spec_from_dict(doc)


def test_problem_rejects_negative_cost():
    doc = desk1_document()
    doc["cost"][0]["output"] = "-1"
    with pytest.raises(SpecError, match="negative"):
        spec_from_dict(doc)


def test_problem_rationals_are_exact():
    doc = desk1_document()
    doc["cost"][0]["output"] = "1/3"
    spec = spec_from_dict(doc)
    assert spec.exact and spec.cost[0][0][0] * 3 == 1
