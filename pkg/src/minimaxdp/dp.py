"""Backward dynamic programs over memories and over compressed nodes.

Memory-level programs run on a :class:`~minimaxdp.system.QuotientGraph`:
with the default memory keys every class is one memory, and with a coarser
compressor each class groups memories that share their accrued distribution
and key, so the per-class values equal the per-memory values.

Node-level programs (information-state and approximate) are evaluated lazily
with memoization, so any node can be queried, including nodes that only
appear as the image of some memory.

Argmin ties always go to the lowest action id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidInfoStateError, StrategyIncompleteError
from .infostates import InfoStateMap, ModelKernel, PooledKernel, validate_info_state
from .numeric import Number
from .system import MemoryGraph, QuotientGraph, SystemSpec


def _argmin(q: tuple) -> int:
    best = 0
    for u in range(1, len(q)):
        if q[u] < q[best]:
            best = u
    return best


@dataclass
class ValueTable:
    """Per-stage ``Q``, ``V`` and greedy law over a list of nodes.

    ``Q[t][i]`` is a tuple indexed by action id; ``nodes[t][i]`` is the node
    (a memory, a memory-class key or an info-state key).
    """

    kind: str
    nodes: list
    Q: list
    V: list
    law: list
    counts: list | None = None
    _index: list = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return len(self.nodes) - 1

    def index(self, t: int, node) -> int:
        if self._index is None:
            self._index = [{n: i for i, n in enumerate(ns)} for ns in self.nodes]
        try:
            return self._index[t][node]
        except KeyError:
            raise StrategyIncompleteError(f"no stage-{t} entry for node {node!r}") from None

    def value(self, t: int, node) -> Number:
        return self.V[t][self.index(t, node)]

    def q(self, t: int, node, u: int) -> Number:
        return self.Q[t][self.index(t, node)][u]

    def action(self, t: int, node) -> int:
        return self.law[t][self.index(t, node)]

    def sizes(self) -> list[int]:
        return [len(ns) for ns in self.nodes]

    def rows(self, label: Callable = repr):
        """``(stage, node label, action id, value)`` with action ``None`` for ``V``."""
        for t, ns in enumerate(self.nodes):
            for i, n in enumerate(ns):
                lab = label(n)
                for u, val in enumerate(self.Q[t][i]):
                    yield t, lab, u, val
                yield t, lab, None, self.V[t][i]


def _table_from_q(kind, graph: QuotientGraph, Q) -> ValueTable:
    V = [[min(q) for q in qs] for qs in Q]
    law = [[_argmin(q) for q in qs] for qs in Q]
    return ValueTable(kind, graph.key, Q, V, law, graph.count)


def _terminal_q(spec: SystemSpec, r, extra: Number = 0) -> tuple:
    cT = spec.cost[spec.T]
    return tuple(
        max(cT[x][u] + v for x, v in r.items()) + extra for u in range(len(spec.U))
    )


def _stage_q(spec: SystemSpec, graph: QuotientGraph, t: int, i: int, V_next) -> tuple:
    r = graph.r[t][i]
    cost = spec.cost[t]
    reach = spec.reachable_observations[t]
    out = []
    for u in range(len(spec.U)):
        kids = graph.children[t][i][u]
        vals = {y: V_next[j] for y, j in kids.items()}
        out.append(max(cost[x][u] + v + max(vals[y] for y in reach[x][u]) for x, v in r.items()))
    return tuple(out)


def solve_memory_terminal_dp(spec: SystemSpec, graph: MemoryGraph | None = None) -> ValueTable:
    """Values of the memory DP whose terminal stage charges the whole accrued cost.

    ``Q_T(m, u) = max (c_T(x, u) + a)`` over the joint range of state and
    accrued cost; earlier stages take the max of the children's values.
    """
    graph = graph if graph is not None else MemoryGraph(spec)
    T = spec.T
    Q: list = [None] * (T + 1)
    Q[T] = [_terminal_q(spec, r, off) for r, off in zip(graph.r[T], graph.offset[T])]
    V_next = [min(q) for q in Q[T]]
    for t in range(T - 1, -1, -1):
        Q[t] = [
            tuple(max(V_next[j] for j in graph.children[t][i][u].values()) for u in range(len(spec.U)))
            for i in range(len(graph.r[t]))
        ]
        V_next = [min(q) for q in Q[t]]
    return _table_from_q("memory", graph, Q)


def solve_specialized_dp(spec: SystemSpec, graph: QuotientGraph | None = None) -> ValueTable:
    """Values of the DP driven by normalized accrued distributions.

    ``Q_t(m, u) = max (c_t(x, u) + V_{t+1}(m') + r_t(x, m' | m, u))`` and
    ``Q_T(m, u) = max (c_T(x, u) + r_T(x | m))``.
    """
    graph = graph if graph is not None else MemoryGraph(spec)
    T = spec.T
    Q: list = [None] * (T + 1)
    Q[T] = [_terminal_q(spec, r) for r in graph.r[T]]
    V_next = [min(q) for q in Q[T]]
    for t in range(T - 1, -1, -1):
        Q[t] = [_stage_q(spec, graph, t, i, V_next) for i in range(len(graph.r[t]))]
        V_next = [min(q) for q in Q[t]]
    return _table_from_q("specialized", graph, Q)


class NodeDP:
    """Lazily evaluated node-level DP over a kernel.

    ``value(t, key)`` computes (and memoizes) ``V(t, key)`` together with the
    ``Q`` row and greedy action, recursing into the successor nodes that the
    kernel's accrued distribution supports.
    """

    def __init__(self, spec: SystemSpec, kernel, kind: str = "infostate"):
        self.spec = spec
        self.kernel = kernel
        self.kind = kind
        T = spec.T
        self.Q = [dict() for _ in range(T + 1)]
        self.V = [dict() for _ in range(T + 1)]
        self.law = [dict() for _ in range(T + 1)]

    def _solve(self, t, key):
        spec = self.spec
        nU = len(spec.U)
        if t == spec.T:
            q = _terminal_q(spec, self.kernel.terminal(key))
        else:
            cost = spec.cost[t]
            q = []
            for u in range(nU):
                joint = self.kernel.transition(t, key, u)
                best = None
                for (x, k2), v in joint.items():
                    s = self.value(t + 1, k2) + cost[x][u] + v
                    if best is None or s > best:
                        best = s
                q.append(best)
            q = tuple(q)
        self.Q[t][key] = q
        self.law[t][key] = _argmin(q)
        self.V[t][key] = min(q)

    def value(self, t: int, key) -> Number:
        v = self.V[t].get(key)
        if v is None:
            self._solve(t, key)
            v = self.V[t][key]
        return v

    def q(self, t: int, key, u: int) -> Number:
        self.value(t, key)
        return self.Q[t][key][u]

    def action(self, t: int, key) -> int:
        self.value(t, key)
        return self.law[t][key]

    def solve(self, keys_by_stage=None) -> "NodeDP":
        for key in self.kernel.roots():
            self.value(0, key)
        if keys_by_stage is not None:
            for t, keys in enumerate(keys_by_stage):
                for key in keys:
                    self.value(t, key)
        return self

    def sizes(self) -> list[int]:
        return [len(v) for v in self.V]

    def table(self) -> ValueTable:
        nodes = [list(v) for v in self.V]
        return ValueTable(
            self.kind,
            nodes,
            [[self.Q[t][k] for k in ns] for t, ns in enumerate(nodes)],
            [[self.V[t][k] for k in ns] for t, ns in enumerate(nodes)],
            [[self.law[t][k] for k in ns] for t, ns in enumerate(nodes)],
        )


def _kernel(spec, ism, kernel, graph):
    if kernel == "pooled":
        return PooledKernel(graph if graph is not None else QuotientGraph(spec, ism))
    if kernel == "model":
        return ModelKernel(spec, ism)
    if isinstance(kernel, (PooledKernel, ModelKernel)):
        return kernel
    raise ValueError(f"unknown kernel {kernel!r}")


def solve_infostate_dp(
    spec: SystemSpec, ism: InfoStateMap, kernel="pooled", graph: QuotientGraph | None = None
) -> NodeDP:
    """Information-state DP; refuses compressors that fail validation."""
    graph = graph if graph is not None else QuotientGraph(spec, ism)
    res = validate_info_state(spec, ism, graph)
    if not res.ok:
        raise InvalidInfoStateError(
            f"{ism.name} is not an information state for this system", res.counterexample
        )
    k = _kernel(spec, ism, kernel, graph)
    dp = NodeDP(spec, k, "infostate")
    return dp.solve(k.keys(t) for t in range(spec.T + 1)) if isinstance(k, PooledKernel) else dp.solve()


def solve_approx_dp(
    spec: SystemSpec, ism: InfoStateMap, kernel="pooled", graph: QuotientGraph | None = None
) -> NodeDP:
    """Approximate-information-state DP over the nodes reachable from the roots."""
    k = _kernel(spec, ism, kernel, graph)
    dp = NodeDP(spec, k, "approx")
    if isinstance(k, PooledKernel):
        return dp.solve([k.keys(t) for t in range(spec.T + 1)])
    return dp.solve()


def evaluate_strategy(spec: SystemSpec, graph: QuotientGraph, policy: Callable) -> ValueTable:
    """Worst-case performance ``(Theta, Lambda)`` of a strategy on memory classes.

    ``policy(t, key)`` gives the action for the class key at stage ``t``; with
    ``graph`` built from a compressor this evaluates ``g_t(m) = g(sigma_t(m))``.
    The returned table's ``Q`` is ``Theta``, its ``V`` is ``Lambda`` and its
    law is the evaluated strategy.
    """
    T = spec.T
    Q: list = [None] * (T + 1)
    law: list = [None] * (T + 1)
    Q[T] = [_terminal_q(spec, r) for r in graph.r[T]]
    law[T] = [policy(T, k) for k in graph.key[T]]
    lam = [q[u] for q, u in zip(Q[T], law[T])]
    V = [None] * (T + 1)
    V[T] = lam
    for t in range(T - 1, -1, -1):
        Q[t] = [_stage_q(spec, graph, t, i, lam) for i in range(len(graph.r[t]))]
        law[t] = [policy(t, k) for k in graph.key[t]]
        lam = [q[u] for q, u in zip(Q[t], law[t])]
        V[t] = lam
    return ValueTable("strategy", graph.key, Q, V, law, graph.count)


def root_values(table: ValueTable, graph: QuotientGraph) -> dict:
    """``y0 -> V_0`` for tables whose stage-0 nodes are root classes."""
    return {y: table.V[0][i] for y, i in graph.root_index.items()}
