"""Finite partially observed systems under the worst-case criterion.

A :class:`SystemSpec` holds dense per-stage tables for dynamics, observation
and cost. Conditional ranges and accrued distributions over memories are
computed by a forward max-plus recursion on the unnormalized cost-to-come
``v_t(x)``: the largest accrued cost of any trajectory that is consistent
with the memory and ends in ``x``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .distributions import CostDistribution, JointCostDistribution
from .errors import ConditioningError, SpecError, StrategyIncompleteError
from .numeric import Number, is_exact
from .sets import FiniteMetricSpace


class Memory(NamedTuple):
    """Observation/action history ``(y_0..y_t, u_0..u_{t-1})``."""

    observations: tuple
    actions: tuple

    @classmethod
    def root(cls, y: int) -> "Memory":
        return cls((y,), ())

    @property
    def t(self) -> int:
        return len(self.observations) - 1

    def extend(self, u: int, y: int) -> "Memory":
        return Memory(self.observations + (y,), self.actions + (u,))

    def parent(self) -> "Memory":
        if not self.actions:
            raise ValueError("a root memory has no parent")
        return Memory(self.observations[:-1], self.actions[:-1])

    def label(self, spec: "SystemSpec") -> str:
        ys = " ".join(spec.Y.labels[y] for y in self.observations)
        us = " ".join(spec.U.labels[u] for u in self.actions)
        return f"y=[{ys}] u=[{us}]"


def _check_memory(m: Memory) -> None:
    if len(m.observations) != len(m.actions) + 1:
        raise ValueError(f"malformed memory {m!r}")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Problem data: horizon, spaces and dense stage tables.

    ``dynamics[t][x][u][w]`` for ``t < T``; ``observation[t][x][n]`` and
    ``cost[t][x][u]`` for ``t <= T``. ``initial_observations`` optionally
    restricts the root memories ``m_0 = y_0`` that are solved and simulated.
    """

    horizon: int
    X: FiniteMetricSpace
    U: FiniteMetricSpace
    Y: FiniteMetricSpace
    W: FiniteMetricSpace
    N: FiniteMetricSpace
    initial_range: frozenset
    dynamics: tuple
    observation: tuple
    cost: tuple
    initial_observations: frozenset | None = None
    name: str = ""
    meta: Mapping = field(default_factory=dict, repr=False)

    def __post_init__(self):
        T = self.horizon
        if not isinstance(T, int) or T < 0:
            raise SpecError(f"horizon must be a nonnegative integer, got {T!r}")
        nX, nU, nY, nW, nN = map(len, (self.X, self.U, self.Y, self.W, self.N))
        x0 = frozenset(self.initial_range)
        if not x0:
            raise SpecError("initial range is empty")
        if any(not 0 <= x < nX for x in x0):
            raise SpecError("initial range has points outside X")
        object.__setattr__(self, "initial_range", x0)
        if self.initial_observations is not None:
            y0 = frozenset(self.initial_observations)
            if not y0 or any(not 0 <= y < nY for y in y0):
                raise SpecError("initial observations must be a nonempty subset of Y")
            object.__setattr__(self, "initial_observations", y0)
        if len(self.dynamics) != T:
            raise SpecError(f"dynamics must cover stages 0..{T - 1}")
        if len(self.observation) != T + 1 or len(self.cost) != T + 1:
            raise SpecError(f"observation and cost must cover stages 0..{T}")
        for t, tab in enumerate(self.dynamics):
            for x, x_tab in enumerate(_rows(tab, nX, "dynamics", t)):
                for u, u_tab in enumerate(_rows(x_tab, nU, "dynamics", t, x)):
                    for w, nxt in enumerate(_rows(u_tab, nW, "dynamics", t, x, u)):
                        if not (isinstance(nxt, int) and 0 <= nxt < nX):
                            raise SpecError(f"dynamics t={t} x={x} u={u} w={w}: bad next state {nxt!r}")
        for t, tab in enumerate(self.observation):
            for x, x_tab in enumerate(_rows(tab, nX, "observation", t)):
                for n, y in enumerate(_rows(x_tab, nN, "observation", t, x)):
                    if not (isinstance(y, int) and 0 <= y < nY):
                        raise SpecError(f"observation t={t} x={x} n={n}: bad observation {y!r}")
        for t, tab in enumerate(self.cost):
            for x, x_tab in enumerate(_rows(tab, nX, "cost", t)):
                for u, c in enumerate(_rows(x_tab, nU, "cost", t, x)):
                    if isinstance(c, bool) or not isinstance(c, (int, float)) and not is_exact(c):
                        raise SpecError(f"cost t={t} x={x} u={u}: not a number")
                    if c < 0:
                        raise SpecError(f"cost t={t} x={x} u={u} is negative ({c})")

    @property
    def T(self) -> int:
        return self.horizon

    @property
    def exact(self) -> bool:
        return all(is_exact(c) for tab in self.cost for row in tab for c in row)

    @cached_property
    def successors(self) -> list:
        """``successors[t][x][u]``: distinct next states over all disturbances."""
        return [
            [[tuple(sorted(set(row))) for row in x_tab] for x_tab in tab] for tab in self.dynamics
        ]

    @cached_property
    def observable(self) -> list:
        """``observable[t][x]``: distinct observations of ``x`` over all noises."""
        return [[tuple(sorted(set(row))) for row in tab] for tab in self.observation]

    @cached_property
    def reachable_observations(self) -> list:
        """``reachable_observations[t][x][u]``: observations possible at ``t + 1``."""
        out = []
        for t in range(self.T):
            obs = self.observable[t + 1]
            out.append(
                [
                    [frozenset(y for x2 in nxt for y in obs[x2]) for nxt in x_row]
                    for x_row in self.successors[t]
                ]
            )
        return out

    def root_observations(self) -> list[int]:
        """Feasible ``y_0`` values (restricted by ``initial_observations``)."""
        ys = {y for x in self.initial_range for y in self.observable[0][x]}
        if self.initial_observations is not None:
            ys &= self.initial_observations
        return sorted(ys)

    def initial_cost_to_come(self, y0: int) -> dict:
        v = {x: 0 for x in sorted(self.initial_range) if y0 in self.observable[0][x]}
        if not v:
            raise ConditioningError(f"observation {self.Y.labels[y0]!r} is infeasible at t=0")
        return v


def _rows(seq, n, what, *where):
    if len(seq) != n:
        loc = " ".join(f"{k}={v}" for k, v in zip(("t", "x", "u"), where))
        raise SpecError(f"{what} table at {loc}: expected {n} entries, got {len(seq)}")
    return seq


def propagate(spec: SystemSpec, t: int, v: Mapping, u: int):
    """One step of the max-plus filter from stage ``t`` under action ``u``.

    Returns ``(children, reach)``: ``children[y][x']`` is the unnormalized
    cost-to-come at ``t + 1`` for the memory extended by ``(u, y)``, and
    ``reach[x]`` is the set of observations at ``t + 1`` reachable from ``x``.
    """
    succ = spec.successors[t]
    obs = spec.observable[t + 1]
    cost = spec.cost[t]
    reach_t = spec.reachable_observations[t]
    children: dict = {}
    reach = {}
    for x, a in v.items():
        a2 = a + cost[x][u]
        reach[x] = reach_t[x][u]
        for x2 in succ[x][u]:
            for y in obs[x2]:
                d = children.get(y)
                if d is None:
                    children[y] = {x2: a2}
                else:
                    old = d.get(x2)
                    if old is None or old < a2:
                        d[x2] = a2
    return children, reach


def cost_to_come(spec: SystemSpec, m: Memory) -> dict:
    """Unnormalized ``v_t(x)``: max accrued cost of trajectories consistent with ``m``."""
    _check_memory(m)
    v = spec.initial_cost_to_come(m.observations[0])
    for t, u in enumerate(m.actions):
        children, _ = propagate(spec, t, v, u)
        v = children.get(m.observations[t + 1])
        if v is None:
            raise ConditioningError(f"memory {m.label(spec)} is infeasible at t={t + 1}")
    return v


def conditional_accrued(spec: SystemSpec, m: Memory) -> CostDistribution:
    """Accrued distribution ``r_t(x | m_t)`` over the state space."""
    return CostDistribution.normalized(cost_to_come(spec, m))


def transition_accrued(spec: SystemSpec, m: Memory, u: int) -> JointCostDistribution:
    """Joint accrued distribution ``r_t(x_t, m_{t+1} | m_t, u_t)``.

    Its value at ``(x, (m, u, y'))`` is ``r_t(x | m)`` whenever ``y'`` is an
    observation reachable from ``x`` under ``u``.
    """
    if m.t >= spec.T:
        raise ValueError("no transition from the terminal stage")
    r = conditional_accrued(spec, m)
    reach = spec.reachable_observations[m.t]
    return JointCostDistribution(
        {(x, m.extend(u, y)): val for x, val in r.items() for y in reach[x][u]}, check=False
    )


def joint_range(spec: SystemSpec, m: Memory) -> frozenset:
    """``[[X_t, A_t | m_t]]`` as a set of ``(x, a)`` pairs."""
    _check_memory(m)
    cur = {(x, 0) for x in spec.initial_range if m.observations[0] in spec.observable[0][x]}
    for t, u in enumerate(m.actions):
        y = m.observations[t + 1]
        nxt = set()
        for x, a in cur:
            a2 = a + spec.cost[t][x][u]
            for x2 in spec.successors[t][x][u]:
                if y in spec.observable[t + 1][x2]:
                    nxt.add((x2, a2))
        cur = nxt
    if not cur:
        raise ConditioningError(f"memory {m.label(spec)} is infeasible")
    return frozenset(cur)


class MemoryKeys:
    """Compressor that keeps the whole memory (no compression)."""

    def root_key(self, y0, r0):
        return Memory.root(y0)

    def child_key(self, t, key, u, y, r):
        return key.extend(u, y)


class QuotientGraph:
    """Feasible memories grouped into classes, stage by stage.

    Two memories share a class when they have the same normalized accrued
    distribution and the same compressor key. Both are determined by the
    parent class and the new ``(u, y)``, so ``children[t][i][u][y]`` is well
    defined. Each class records its memory count and the largest accrued cost
    ``offset`` among its members (unnormalized ``v = r + offset``).
    """

    def __init__(self, spec: SystemSpec, compressor=None, roots: Iterable[int] | None = None):
        self.spec = spec
        self.compressor = MemoryKeys() if compressor is None else compressor
        roots = spec.root_observations() if roots is None else sorted(roots)
        self.r: list[list[CostDistribution]] = []
        self.key: list[list] = []
        self.offset: list[list] = []
        self.count: list[list[int]] = []
        self.children: list[list[dict]] = []
        self._intern: list[dict] = []
        self.root_index: dict = {}
        self._open_stage()
        for y in roots:
            r0 = CostDistribution.normalized(spec.initial_cost_to_come(y))
            i = self._add(0, r0, self.compressor.root_key(y, r0))
            self._merge(0, i, 0, 1)
            self.root_index[y] = i
        for t in range(spec.T):
            self._open_stage()
            kids = []
            for i, r in enumerate(self.r[t]):
                key, off, cnt = self.key[t][i], self.offset[t][i], self.count[t][i]
                per_u = {}
                for u in range(len(spec.U)):
                    children, _ = propagate(spec, t, r, u)
                    per_u[u] = {}
                    for y in sorted(children):
                        raw = children[y]
                        top = max(raw.values())
                        rc = CostDistribution({x: a - top for x, a in raw.items()}, check=False)
                        j = self._add(t + 1, rc, self.compressor.child_key(t, key, u, y, rc))
                        self._merge(t + 1, j, off + top, cnt)
                        per_u[u][y] = j
                kids.append(per_u)
            self.children.append(kids)
        del self._intern

    def _open_stage(self):
        for lst in (self.r, self.key, self.offset, self.count):
            lst.append([])
        self._intern.append({})

    def _add(self, t, r, key) -> int:
        tag = (r, key)
        i = self._intern[t].get(tag)
        if i is None:
            i = len(self.r[t])
            self._intern[t][tag] = i
            self.r[t].append(r)
            self.key[t].append(key)
            self.offset[t].append(None)
            self.count[t].append(0)
        return i

    def _merge(self, t, i, offset, count):
        old = self.offset[t][i]
        if old is None or offset > old:
            self.offset[t][i] = offset
        self.count[t][i] += count

    @property
    def T(self) -> int:
        return self.spec.T

    def __len__(self):
        return sum(len(s) for s in self.r)

    def sizes(self) -> list[int]:
        """Number of classes per stage."""
        return [len(s) for s in self.r]

    def memory_counts(self) -> list[int]:
        """Number of feasible memories per stage."""
        return [sum(c) for c in self.count]

    def reach(self, t: int, i: int, u: int) -> dict:
        """``x -> observations at t + 1`` reachable from each supported ``x``."""
        rows = self.spec.reachable_observations[t]
        return {x: rows[x][u] for x in self.r[t][i]}


class MemoryGraph(QuotientGraph):
    """All feasible memories, one class per memory.

    ``memories[t][i]`` is the memory of class ``i``; ``values[t][i]`` is its
    unnormalized cost-to-come.
    """

    def __init__(self, spec: SystemSpec, roots: Iterable[int] | None = None):
        super().__init__(spec, MemoryKeys(), roots)
        self.memories = self.key
        self.index = [{m: i for i, m in enumerate(ms)} for ms in self.memories]

    @property
    def values(self):
        return [
            [{x: v + off for x, v in r.items()} for r, off in zip(rs, offs)]
            for rs, offs in zip(self.r, self.offset)
        ]

    def counts(self) -> list[int]:
        return self.sizes()

    def accrued(self, t: int, i: int) -> CostDistribution:
        return self.r[t][i]

    def max_accrued(self, t: int, i: int) -> Number:
        """``max_{a in [[A_t | m_t]]} a``."""
        return self.offset[t][i]


def enumerate_memories(spec: SystemSpec, t: int, roots: Iterable[int] | None = None) -> list[Memory]:
    """Feasible memories at stage ``t`` in canonical order."""
    if not 0 <= t <= spec.T:
        raise ValueError(f"stage {t} outside 0..{spec.T}")
    return list(MemoryGraph(_truncate(spec, t), roots).memories[t])


def _truncate(spec: SystemSpec, t: int) -> SystemSpec:
    if t == spec.T:
        return spec
    return SystemSpec(
        t, spec.X, spec.U, spec.Y, spec.W, spec.N, spec.initial_range,
        spec.dynamics[:t], spec.observation[: t + 1], spec.cost[: t + 1],
        spec.initial_observations, spec.name, spec.meta,
    )


class _NoKeys:
    def root_key(self, y0, r0):
        return None

    def child_key(self, t, key, u, y, r):
        return None


def estimate_memory_counts(spec: SystemSpec, roots: Iterable[int] | None = None) -> list[int]:
    """Exact feasible-memory count per stage without enumerating memories.

    Memories are grouped by their normalized accrued distribution, which
    determines every child group; counts are propagated through the groups.
    """
    return QuotientGraph(spec, _NoKeys(), roots).memory_counts()


class Strategy:
    """A control strategy ``u_t = g_t(m_t)`` on memories.

    ``law`` is a mapping ``Memory -> action`` or a callable returning an
    action (or ``None`` when undefined).
    """

    def __init__(self, law):
        self.law = law

    def __call__(self, memory: Memory) -> int:
        if callable(self.law) and not isinstance(self.law, Mapping):
            u = self.law(memory)
        else:
            u = self.law.get(memory)
        if u is None:
            raise StrategyIncompleteError(f"strategy undefined on memory {memory!r}")
        return u


@dataclass(frozen=True)
class Trajectory:
    """One rollout; ``accrued[t]`` is the cost accrued before stage ``t``."""

    states: tuple
    observations: tuple
    actions: tuple
    disturbances: tuple
    noises: tuple
    accrued: tuple

    @property
    def total(self) -> Number:
        return self.accrued[-1]


def simulate(spec: SystemSpec, strategy: Callable[[Memory], int], x0: int, ws: Sequence[int], ns: Sequence[int]) -> Trajectory:
    """Deterministic rollout of ``strategy`` under the given uncontrolled inputs."""
    T = spec.T
    if len(ws) != T or len(ns) != T + 1:
        raise ValueError(f"need {T} disturbances and {T + 1} noises")
    if x0 not in spec.initial_range:
        raise ValueError(f"initial state {x0} outside the initial range")
    x = x0
    xs, ys, us = [x0], [], []
    acc = [0]
    memory = None
    for t in range(T + 1):
        y = spec.observation[t][x][ns[t]]
        ys.append(y)
        memory = Memory.root(y) if memory is None else memory.extend(us[-1], y)
        u = strategy(memory)
        us.append(u)
        acc.append(acc[-1] + spec.cost[t][x][u])
        if t < T:
            x = spec.dynamics[t][x][u][ws[t]]
            xs.append(x)
    return Trajectory(tuple(xs), tuple(ys), tuple(us), tuple(ws), tuple(ns), tuple(acc))


def uncontrolled_inputs(spec: SystemSpec):
    """Every ``(x_0, w_{0:T-1}, n_{0:T})`` in ``X_0 x W^T x N^(T+1)``."""
    T = spec.T
    return itertools.product(
        sorted(spec.initial_range),
        itertools.product(range(len(spec.W)), repeat=T),
        itertools.product(range(len(spec.N)), repeat=T + 1),
    )


def worst_case_cost(spec: SystemSpec, strategy, y0: int | None = None) -> Number:
    """Largest total cost over all uncontrolled inputs.

    When ``y0`` is given (or the spec restricts initial observations) only
    inputs producing that first observation are included.
    """
    allowed = {y0} if y0 is not None else spec.initial_observations
    worst = None
    for x0, ws, ns in uncontrolled_inputs(spec):
        if allowed is not None and spec.observation[0][x0][ns[0]] not in allowed:
            continue
        total = simulate(spec, strategy, x0, ws, ns).total
        if worst is None or total > worst:
            worst = total
    if worst is None:
        raise ConditioningError("no uncontrolled input produces the requested first observation")
    return worst
