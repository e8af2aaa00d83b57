from fractions import Fraction

import numpy as np
import pytest

from minimaxdp import BudgetExceededError, SpecError
from minimaxdp.gridworld import (
    ACTIONS,
    STRAIGHT,
    Grid,
    GridConfig,
    _draw_inputs,
    build_gridworld,
    check_budget,
    run_case,
)

N_STRAIGHT = len(STRAIGHT)


def small(**kw):
    return build_gridworld(GridConfig.reduced(horizon=1, **kw))


def target_after(spec, ag, ta, w):
    grid = spec.meta["grid"]
    x = grid.state(grid.index[ag], grid.index[ta])
    return grid.coords[grid.split(spec.dynamics[0][x][2][w])[1]]


@pytest.mark.parametrize(
    "cell,step,expected",
    [
        ((-2, 0), (-1, 0), (-2, 0)),   # west wall
        ((2, 0), (1, 0), (2, 0)),      # east wall
        ((0, 2), (0, 1), (0, 2)),      # north wall
        ((0, -2), (0, -1), (0, -2)),   # south wall
        ((2, 2), (1, 0), (2, 2)),      # corner, both outward moves
        ((2, 2), (0, 1), (2, 2)),
        ((-2, -2), (0, -1), (-2, -2)),
        ((-2, -2), (1, 0), (-1, -2)),  # corner, inward move
        ((0, 0), (0, 1), (0, 1)),
    ],
)
def test_target_moves_are_clipped(cell, step, expected):
    spec = small()
    assert target_after(spec, (0, 0), cell, STRAIGHT.index(step)) == expected


def test_agent_moves_and_diagonal_cost():
    spec = small()
    grid = spec.meta["grid"]
    x = grid.state(grid.index[(2, 2)], grid.index[(0, 0)])
    for u, a in enumerate(ACTIONS):
        ag2, _ = grid.split(spec.dynamics[0][x][u][2])
        want = (2 + a[0], 2 + a[1])
        want = want if max(map(abs, want)) <= 2 else (2, 2)
        assert grid.coords[ag2] == want
        assert spec.cost[0][x][u] == (0 if a in STRAIGHT else 0.5)


def test_obstacles_block_moves():
    spec = build_gridworld(GridConfig(horizon=1))
    grid = spec.meta["grid"]
    # (-2, 0) is an obstacle; a target at (-1, 0) moving west stays put
    assert target_after(spec, (1, 1), (-1, 0), STRAIGHT.index((-1, 0))) == (-1, 0)


def test_observation_reveals_agent_and_noisy_target():
    spec = small()
    grid = spec.meta["grid"]
    x = grid.state(grid.index[(1, 1)], grid.index[(0, 0)])
    seen = {grid.split(spec.observation[0][x][n]) for n in range(N_STRAIGHT)}
    assert {a for a, _ in seen} == {grid.index[(1, 1)]}
    assert {grid.coords[t] for _, t in seen} == {(-1, 0), (1, 0), (0, 0), (0, 1), (0, -1)}


def test_initial_conditional_range_inverts_the_noise():
    spec = build_gridworld(GridConfig(horizon=0))
    grid = spec.meta["grid"]
    (y0,) = spec.initial_observations
    rng = {grid.coords[grid.split(x)[1]] for x in spec.initial_range if y0 in spec.observable[0][x]}
    # y0 = (-1,-3): targets one noise step away that can land on it
    assert rng == {(-1, -3), (0, -3), (-2, -3), (-1, -4), (-1, -2)}


def test_terminal_cost_is_distance():
    spec = small(metric="manhattan")
    grid = spec.meta["grid"]
    x = grid.state(grid.index[(1, 1)], grid.index[(-2, 0)])
    assert spec.cost[1][x][0] == 4
    assert spec.exact
    assert not small().exact


def test_config_validation():
    with pytest.raises(SpecError):
        GridConfig(metric="cosine")
    with pytest.raises(SpecError, match="obstacle"):
        GridConfig(agent_start=(-2, 0))
    with pytest.raises(SpecError, match="outside"):
        GridConfig.reduced(y0=(3, 3))
    cfg = GridConfig.from_dict(GridConfig.reduced().to_dict())
    assert cfg == GridConfig.reduced()
    assert cfg.diagonal_cost == Fraction(1, 2)


def test_budget_refusal(monkeypatch):
    spec = build_gridworld(GridConfig.reduced(horizon=2))
    counts = check_budget(spec, 10_000)
    assert counts == [1, 90, 9315]
    with pytest.raises(BudgetExceededError, match="MINIMAX_DP_BUDGET") as err:
        check_budget(spec, 100)
    assert err.value.estimate == sum(counts)
    monkeypatch.setenv("MINIMAX_DP_BUDGET", "50")
    with pytest.raises(BudgetExceededError):
        check_budget(spec)


def test_draws_are_consistent_with_first_observation(reduced_grid):
    grid = reduced_grid.meta["grid"]
    (y0,) = reduced_grid.initial_observations
    rng = np.random.default_rng(5)
    for _ in range(50):
        x0, ws, ns = _draw_inputs(reduced_grid, grid, rng)
        assert reduced_grid.observation[0][x0][ns[0]] == y0
        assert len(ws) == reduced_grid.T and len(ns) == reduced_grid.T + 1


def test_run_case_is_deterministic_and_bounded():
    cfg = GridConfig.reduced(horizon=2)
    a = run_case(cfg, 0, sims=200, seed=3, repeats=1)
    b = run_case(cfg, 0, sims=200, seed=3, repeats=1, jobs=3)
    assert a.differences == b.differences
    assert a.rollouts_ok and a.sweep_ok
    assert all(x <= y for x, y in zip(a.approx_nodes, a.exact_nodes))
