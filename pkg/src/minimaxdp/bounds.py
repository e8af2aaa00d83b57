"""Approximation errors, Lipschitz constants and the value/performance bound sweep."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import distribution_distance, lipschitz_constant
from .dp import NodeDP, ValueTable, evaluate_strategy, solve_approx_dp, solve_specialized_dp
from .infostates import InfoStateMap, ModelKernel, PooledKernel, make_kernel
from .numeric import Number, le
from .sets import ProductMetric
from .system import QuotientGraph, SystemSpec


class NodeSpace:
    """Stage-``t`` nodes interned to integer ids, with a cached distance matrix."""

    def __init__(self, ism: InfoStateMap, t: int, keys: Sequence):
        self.ism = ism
        self.t = t
        self.keys = list(dict.fromkeys(keys))
        self.ids = {k: i for i, k in enumerate(self.keys)}
        self.D = ism.node_pairwise(t, self.keys, self.keys) if ism.has_metric else None

    def __len__(self):
        return len(self.keys)

    def __call__(self, i: int, j: int):
        return self.D[i, j]

    def pairwise(self, I, J):
        return self.D[np.ix_(np.asarray(I, dtype=int), np.asarray(J, dtype=int))]

    def encode(self, joint: dict) -> dict:
        ids = self.ids
        return {(x, ids[k]): v for (x, k), v in joint.items()}


def cost_lipschitz(spec: SystemSpec) -> list:
    """``L_{c_t} = max_u Lip(c_t(., u))`` over the state space, per stage."""
    out = []
    for t in range(spec.T + 1):
        tab = spec.cost[t]
        out.append(max(lipschitz_constant(lambda x: tab[x][u], spec.X) for u in range(len(spec.U))))
    return out


def alpha_recursion(eps: Sequence, Lc: Sequence, LV: Sequence):
    """``alpha_T = (L_{c_T} + 1) eps_T``; ``alpha_t = alpha_{t+1} + (2 L_t + 1) eps_t``.

    ``LV[t]`` is the Lipschitz constant of the approximate value at stage
    ``t + 1`` (``t < T``). Returns ``(L, alpha)`` with ``L[T] = Lc[T]``.
    """
    T = len(eps) - 1
    L = [max(LV[t], Lc[t]) for t in range(T)] + [Lc[T]]
    alpha = [None] * (T + 1)
    alpha[T] = (Lc[T] + 1) * eps[T]
    for t in range(T - 1, -1, -1):
        alpha[t] = alpha[t + 1] + (2 * L[t] + 1) * eps[t]
    return L, alpha


def compute_epsilons(
    spec: SystemSpec,
    ism: InfoStateMap,
    kernel=None,
    graph: QuotientGraph | None = None,
    extra_keys: Sequence | None = None,
):
    """Per-stage approximation errors of a compressor.

    ``eps_t`` is the largest distance, over memory classes and actions,
    between the joint accrued distribution of (state, next node) conditioned
    on the memory and the one the kernel conditions on the memory's node;
    ``eps_T`` compares the final accrued distributions over states. Distances
    on (state, node) pairs use the max of the state and node metrics.

    Returns ``(eps, spaces)`` where ``spaces[t]`` is the :class:`NodeSpace`
    used for stage ``t`` nodes (``spaces[0]`` is ``None``).
    """
    graph = graph if graph is not None else QuotientGraph(spec, ism)
    kernel = kernel if kernel is not None else PooledKernel(graph)
    if isinstance(kernel, str):
        kernel = make_kernel(spec, ism, kernel, graph)
    pooled = PooledKernel(graph) if not isinstance(kernel, PooledKernel) else kernel
    T = spec.T
    eps = [0] * (T + 1)
    spaces: list = [None] * (T + 1)
    for t in range(T):
        pairs = []
        keys = list(graph.key[t + 1])
        for i, key in enumerate(graph.key[t]):
            for u in range(len(spec.U)):
                mine = pooled.member_transition(t, i, u)
                node = kernel.transition(t, key, u)
                keys.extend(k for _, k in node)
                pairs.append((mine, node))
        if extra_keys is not None:
            keys.extend(extra_keys[t + 1])
        space = NodeSpace(ism, t + 1, keys)
        spaces[t + 1] = space
        metric = ProductMetric(spec.X, space)
        best = 0
        cache: dict = {}
        for mine, node in pairs:
            if mine == node:
                continue
            a = space.encode(mine)
            b = space.encode(node)
            tag = (frozenset(a.items()), id(node))
            d = cache.get(tag)
            if d is None:
                d = distribution_distance(a, b, metric)
                cache[tag] = d
            if d > best:
                best = d
        eps[t] = best
    best = 0
    for i, key in enumerate(graph.key[T]):
        mine = graph.r[T][i]
        node = kernel.terminal(key)
        if dict(mine) != node:
            best = max(best, distribution_distance(mine, node, spec.X))
    eps[T] = best
    return eps, spaces


@dataclass
class BoundReport:
    eps: list
    Lc: list
    LV: list
    L: list
    alpha: list
    declared: bool = False

    def rows(self):
        T = len(self.eps) - 1
        for t in range(T + 1):
            yield t, self.eps[t], self.Lc[t], (self.LV[t] if t < T else None), self.L[t], self.alpha[t]


def compute_alpha_bounds(
    spec: SystemSpec,
    ism: InfoStateMap,
    dp: NodeDP,
    eps: Sequence | None = None,
    spaces: Sequence | None = None,
    kernel=None,
    graph: QuotientGraph | None = None,
) -> BoundReport:
    """Lipschitz constants and ``alpha_t`` for an approximate DP.

    ``L_{V_{t+1}}`` is taken over every stage-``t + 1`` node the approximate
    DP has evaluated, under the compressor's node metric.
    """
    if eps is None or spaces is None:
        eps2, spaces = compute_epsilons(
            spec, ism, kernel if kernel is not None else dp.kernel, graph,
            extra_keys=[list(v) for v in dp.V],
        )
        eps = eps2 if eps is None else list(eps)
    Lc = cost_lipschitz(spec)
    LV = []
    for t in range(spec.T):
        solved = list(dp.V[t + 1])
        space = spaces[t + 1]
        if space is None or any(k not in space.ids for k in solved):
            space = NodeSpace(ism, t + 1, (list(space.keys) if space is not None else []) + solved)
        vals = dp.V[t + 1]
        ids = [space.ids[k] for k in solved]
        LV.append(lipschitz_constant(lambda i: vals[space.keys[i]], space, ids))
    L, alpha = alpha_recursion(eps, Lc, LV)
    return BoundReport(list(eps), Lc, LV, L, alpha)


@dataclass
class SweepResult:
    """Outcome of checking both value and performance bounds on every memory class."""

    report: BoundReport
    computed_eps: list
    gap_V: list
    gap_Q: list
    gap_Lambda: list
    gap_Theta: list
    ok_value: bool
    ok_performance: bool
    ok_declared: bool
    class_counts: list = field(default_factory=list)
    approx_nodes: list = field(default_factory=list)
    memory_counts: list = field(default_factory=list)
    V0: dict = field(default_factory=dict)
    Vhat0: dict = field(default_factory=dict)
    Lambda0: dict = field(default_factory=dict)
    seconds: float = 0.0
    dp: NodeDP | None = field(default=None, repr=False)
    optimal: ValueTable | None = field(default=None, repr=False)
    strategy: ValueTable | None = field(default=None, repr=False)
    graph: QuotientGraph | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.ok_value and self.ok_performance and self.ok_declared


def bound_sweep(
    spec: SystemSpec,
    ism: InfoStateMap,
    kernel: str = "pooled",
    declared_epsilon: Sequence | None = None,
    graph: QuotientGraph | None = None,
) -> SweepResult:
    """Solve the approximate DP and check every memory class against its bounds.

    For each stage ``t`` and memory class ``m`` (with node ``s = sigma(m)``):
    ``|V_t(m) - Vhat_t(s)| <= alpha_t``, ``|Q_t(m, u) - Qhat_t(s, u)| <= alpha_t``,
    ``|V_t(m) - Lambda_t(m)| <= 2 alpha_t`` and
    ``|Q_t(m, u) - Theta_t(m, u)| <= 2 alpha_t``.

    With ``declared_epsilon`` the bounds use the declared errors, and the
    sweep also fails when a computed error exceeds its declared value.
    """
    start = time.perf_counter()
    graph = graph if graph is not None else QuotientGraph(spec, ism)
    k = make_kernel(spec, ism, kernel, graph)
    dp = solve_approx_dp(spec, ism, k, graph)
    for t, keys in enumerate(graph.key):
        for key in keys:
            dp.value(t, key)
    optimal = solve_specialized_dp(spec, graph)
    strategy = evaluate_strategy(spec, graph, dp.action)
    eps, spaces = compute_epsilons(spec, ism, k, graph, extra_keys=[list(v) for v in dp.V])
    use = eps if declared_epsilon is None else list(declared_epsilon)
    report = compute_alpha_bounds(spec, ism, dp, use, spaces)
    report.declared = declared_epsilon is not None
    ok_declared = declared_epsilon is None or all(le(e, d) for e, d in zip(eps, declared_epsilon))
    T = spec.T
    gV, gQ, gL, gTh = [], [], [], []
    ok_value = ok_perf = True
    for t in range(T + 1):
        a = report.alpha[t]
        mv = mq = ml = mth = 0
        for i, key in enumerate(graph.key[t]):
            V = optimal.V[t][i]
            Qrow = optimal.Q[t][i]
            mv = max(mv, abs(V - dp.value(t, key)))
            hatQ = dp.Q[t][key]
            mq = max(mq, max(abs(x - y) for x, y in zip(Qrow, hatQ)))
            ml = max(ml, abs(V - strategy.V[t][i]))
            mth = max(mth, max(abs(x - y) for x, y in zip(Qrow, strategy.Q[t][i])))
        gV.append(mv)
        gQ.append(mq)
        gL.append(ml)
        gTh.append(mth)
        ok_value &= le(mv, a) and le(mq, a)
        ok_perf &= le(ml, 2 * a) and le(mth, 2 * a)
    roots = graph.root_index
    res = SweepResult(
        report, eps, gV, gQ, gL, gTh, ok_value, ok_perf, ok_declared,
        class_counts=graph.sizes(),
        approx_nodes=dp.sizes(),
        memory_counts=graph.memory_counts(),
        V0={y: optimal.V[0][i] for y, i in roots.items()},
        Vhat0={y: dp.value(0, graph.key[0][i]) for y, i in roots.items()},
        Lambda0={y: strategy.V[0][i] for y, i in roots.items()},
        dp=dp, optimal=optimal, strategy=strategy, graph=graph,
    )
    res.seconds = time.perf_counter() - start
    return res
