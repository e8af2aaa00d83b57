import numpy as np
import pytest

from minimaxdp import (
    InvalidInfoStateError,
    MemoryGraph,
    PreconditionError,
    SpecError,
    conditional_accrued,
    indicator,
)
from minimaxdp.dp import NodeDP, solve_infostate_dp, solve_specialized_dp
from minimaxdp.gridworld import GridConfig, Grid
from minimaxdp.infostates import (
    ConditionalRangeInfo,
    JointRangeInfo,
    MemoryInfo,
    ModelKernel,
    NormalizedAccruedInfo,
    PerfectObservationInfo,
    PooledKernel,
    QuantizedRangeInfo,
    Quantizer,
    WindowInfo,
    grid_quantizer,
    random_relabeling,
    validate_info_state,
)
from minimaxdp.sets import hausdorff
from minimaxdp.system import QuotientGraph


def assert_preserves_values(spec, ism, kernel):
    g = MemoryGraph(spec)
    sp = solve_specialized_dp(spec, g)
    dp = solve_infostate_dp(spec, ism, kernel)
    for t, ms in enumerate(g.memories):
        for i, m in enumerate(ms):
            s = ism.sigma(m)
            assert dp.value(t, s) == sp.V[t][i], (spec.name, t, m)
            assert dp.Q[t][s] == sp.Q[t][i]


@pytest.mark.parametrize("kernel", ["pooled", "model"])
def test_normalized_accrued_is_an_information_state(small_family, kernel):
    for spec in small_family:
        ism = NormalizedAccruedInfo(spec)
        assert validate_info_state(spec, ism).ok
        assert_preserves_values(spec, ism, kernel)


@pytest.mark.parametrize("kernel", ["pooled", "model"])
def test_joint_range_and_memory_are_information_states(small_family, kernel):
    for spec in small_family[:20]:
        for ism in (JointRangeInfo(spec), MemoryInfo(spec)):
            assert validate_info_state(spec, ism).ok
            assert_preserves_values(spec, ism, kernel)


@pytest.mark.parametrize("kernel", ["pooled", "model"])
def test_state_is_an_information_state_when_perfectly_observed(perfect_family, kernel):
    for spec in perfect_family:
        ism = PerfectObservationInfo(spec)
        assert validate_info_state(spec, ism).ok
        assert_preserves_values(spec, ism, kernel)


@pytest.mark.parametrize("kernel", ["pooled", "model"])
def test_conditional_range_is_an_information_state_for_action_costs(action_only_family, kernel):
    for spec in action_only_family:
        ism = ConditionalRangeInfo(spec)
        assert validate_info_state(spec, ism).ok
        assert_preserves_values(spec, ism, kernel)
        g = MemoryGraph(spec)
        for ms in g.memories:
            for m in ms:
                assert conditional_accrued(spec, m) == indicator(ism.sigma(m))


def test_preconditions_are_enforced(desk, small_family):
    with pytest.raises(PreconditionError, match="not perfectly observed"):
        PerfectObservationInfo(desk)
    with pytest.raises(PreconditionError, match="interim cost depends on the state"):
        ConditionalRangeInfo(desk)


def test_window_is_rejected_with_counterexample(desk):
    ism = WindowInfo(desk, 1)
    res = validate_info_state(desk, ism)
    assert not res.ok and res.counterexample["t"] in (0, 1)
    with pytest.raises(InvalidInfoStateError) as err:
        solve_infostate_dp(desk, ism)
    assert err.value.counterexample


def test_case1_never_has_more_nodes_than_joint_range(small_family, desk):
    for spec in small_family + [desk]:
        a = QuotientGraph(spec, NormalizedAccruedInfo(spec))
        b = QuotientGraph(spec, JointRangeInfo(spec))
        na = [len(set(k)) for k in a.key]
        nb = [len(set(k)) for k in b.key]
        assert all(x <= y for x, y in zip(na, nb))


def test_model_and_pooled_kernels_agree_for_exact_maps(small_family):
    for spec in small_family:
        ism = NormalizedAccruedInfo(spec)
        g = QuotientGraph(spec, ism)
        pk, mk = PooledKernel(g), ModelKernel(spec, ism)
        for t in range(spec.T):
            for key in pk.keys(t):
                for u in range(len(spec.U)):
                    assert pk.transition(t, key, u) == mk.transition(t, key, u)


def test_random_relabeling_is_a_partition(small_family):
    rng = np.random.default_rng(0)
    for spec in small_family[:10]:
        ism = random_relabeling(spec, 2, rng)
        g = QuotientGraph(spec, ism)
        assert all(k in (0, 1) for keys in g.key for k in keys)


def test_quantizer_covering_radius_on_default_grid():
    grid = Grid(GridConfig())
    q = grid.default_quantizer()
    assert len(grid) == 81 - 6
    assert q.covering_radius() <= 1
    for c in range(len(grid)):
        assert q.mu[c] in q.points
        assert grid.cell_space.d(c, q.mu[c]) == min(grid.cell_space.d(c, p) for p in q.points)
    for c, (i, j) in enumerate(grid.coords):
        if max(abs(i + 1), abs(j + 3)) <= 2:
            assert q.mu[c] == c


def test_quantizer_ties_go_to_lowest_point():
    grid = Grid(GridConfig.reduced())
    q = grid_quantizer(grid.cell_space, grid.coords, grid.index[(-2, -2)], 0)
    for c in range(len(grid)):
        dists = [grid.cell_space.d(c, p) for p in q.points]
        best = min(dists)
        assert q.mu[c] == q.points[dists.index(best)]


def test_quantizer_rejects_sparse_points():
    grid = Grid(GridConfig.reduced())
    with pytest.raises(SpecError, match="covering radius"):
        Quantizer.from_points(grid.cell_space, [0])


def test_quantized_nodes_and_metric(reduced_grid):
    ism = QuantizedRangeInfo(reduced_grid)
    grid = reduced_grid.meta["grid"]
    (y0,) = reduced_grid.initial_observations
    r0 = {x: 0 for x in reduced_grid.initial_range if y0 in reduced_grid.observable[0][x]}
    key = ism.root_key(y0, r0)
    ag, pts, yy = key
    assert ag == grid.index[(1, 1)] and yy == y0
    assert pts == frozenset(ism.q.mu[x % len(grid)] for x in r0)
    other = (ag, frozenset({0}), y0)
    assert ism.node_distance(0, key, other) == hausdorff(pts, {0}, grid.cell_space)
    M = ism.node_pairwise(0, [key, other], [key, other])
    assert M[0, 0] == 0 and M[0, 1] == M[1, 0] == ism.node_distance(0, key, other)


def test_identity_quantizer_matches_conditional_range(reduced_grid):
    grid = reduced_grid.meta["grid"]
    ism = QuantizedRangeInfo(reduced_grid, Quantizer.identity(grid.cell_space))
    exact = ConditionalRangeInfo(reduced_grid)
    a = ModelKernel(reduced_grid, ism)
    b = ModelKernel(reduced_grid, exact)
    va = NodeDP(reduced_grid, a).solve()
    vb = NodeDP(reduced_grid, b).solve()
    assert va.sizes() == vb.sizes()
    assert va.value(0, a.roots()[0]) == vb.value(0, b.roots()[0])
