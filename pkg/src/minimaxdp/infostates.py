"""Memory compressors (information states) and the kernels conditioned on them.

A compressor assigns each feasible memory a hashable node key. Keys are
built incrementally: ``root_key(y0, r0)`` at stage 0 and
``child_key(t, key, u, y, r)`` for the memory extended by ``(u, y)``, where
``r`` is the child's normalized accrued distribution. Compressors used for
approximation also carry a node metric.

Two kernels turn a node into the accrued distributions a dynamic program
needs. :class:`PooledKernel` conditions on the event "the memory maps to this
node" by pooling every memory with that key. :class:`ModelKernel` lifts the
node to a surrogate accrued distribution and propagates it, so it never
touches memories.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .distributions import CostDistribution, distribution_distance
from .errors import PreconditionError, SpecError
from .numeric import FLOAT_TOL, eq
from .sets import FiniteMetricSpace, hausdorff, pairwise
from .system import Memory, QuotientGraph, SystemSpec, cost_to_come, propagate


class InfoStateMap:
    """Base compressor. Subclasses define keys, and optionally a metric and a lift."""

    name = "compressor"
    has_metric = True
    # True when child keys depend only on the support of ``r``; the node-level
    # model then skips normalizing child distributions.
    support_only = False

    def __init__(self, spec: SystemSpec):
        self.spec = spec

    def root_key(self, y0: int, r0: CostDistribution) -> Hashable:
        raise NotImplementedError

    def child_key(self, t: int, key, u: int, y: int, r: CostDistribution) -> Hashable:
        raise NotImplementedError

    def node_distance(self, t: int, a, b):
        raise PreconditionError(f"{self.name} nodes carry no metric")

    def node_pairwise(self, t: int, A: Sequence, B: Sequence) -> np.ndarray:
        return pairwise(lambda a, b: self.node_distance(t, a, b), list(A), list(B))

    def lift(self, t: int, key) -> dict:
        """Surrogate unnormalized accrued values for a node."""
        raise PreconditionError(f"{self.name} has no node-level model; use the pooled kernel")

    def label(self, key) -> str:
        return repr(key)

    def sigma(self, memory: Memory):
        """Key of a single memory, computed along its history."""
        spec = self.spec
        v = spec.initial_cost_to_come(memory.observations[0])
        key = self.root_key(memory.observations[0], CostDistribution.normalized(v))
        for t, u in enumerate(memory.actions):
            y = memory.observations[t + 1]
            children, _ = propagate(spec, t, v, u)
            v = children[y]
            key = self.child_key(t, key, u, y, CostDistribution.normalized(v))
        return key


def _dist_label(spec: SystemSpec, r) -> str:
    return ";".join(f"{spec.X.labels[x]}:{r[x]}" for x in sorted(r))


def _set_label(labels, s) -> str:
    return "{" + ",".join(labels[x] for x in sorted(s)) + "}"


class NormalizedAccruedInfo(InfoStateMap):
    """Node = the memory's normalized accrued distribution over states."""

    name = "case1"

    def root_key(self, y0, r0):
        return r0

    def child_key(self, t, key, u, y, r):
        return r

    def node_distance(self, t, a, b):
        return distribution_distance(a, b, self.spec.X)

    def lift(self, t, key):
        return dict(key)

    def label(self, key):
        return _dist_label(self.spec, key)


class PerfectObservationInfo(InfoStateMap):
    """Node = the current state, for systems whose observation reveals it."""

    name = "case2"
    support_only = True

    def __init__(self, spec: SystemSpec):
        super().__init__(spec)
        for t, rows in enumerate(spec.observable):
            seen = {}
            for x, ys in enumerate(rows):
                if len(ys) != 1:
                    raise PreconditionError(
                        f"not perfectly observed: state {spec.X.labels[x]!r} has "
                        f"{len(ys)} possible observations at t={t}"
                    )
                if ys[0] in seen:
                    raise PreconditionError(
                        f"not perfectly observed: states {spec.X.labels[seen[ys[0]]]!r} and "
                        f"{spec.X.labels[x]!r} share an observation at t={t}"
                    )
                seen[ys[0]] = x

    def root_key(self, y0, r0):
        (x,) = r0
        return x

    def child_key(self, t, key, u, y, r):
        (x,) = r
        return x

    def node_distance(self, t, a, b):
        return self.spec.X.d(a, b)

    def node_pairwise(self, t, A, B):
        return self.spec.X.pairwise(A, B)

    def lift(self, t, key):
        return {key: 0}

    def label(self, key):
        return self.spec.X.labels[key]


class ConditionalRangeInfo(InfoStateMap):
    """Node = the conditional range of the state, for action-only interim costs."""

    name = "case3"
    support_only = True

    def __init__(self, spec: SystemSpec):
        super().__init__(spec)
        check_action_only_costs(spec)

    def root_key(self, y0, r0):
        return frozenset(r0)

    def child_key(self, t, key, u, y, r):
        return frozenset(r)

    def node_distance(self, t, a, b):
        return hausdorff(a, b, self.spec.X)

    def lift(self, t, key):
        return dict.fromkeys(key, 0)

    def label(self, key):
        return _set_label(self.spec.X.labels, key)


def check_action_only_costs(spec: SystemSpec) -> None:
    """Raise unless every interim cost ``c_t(x, u)``, ``t < T``, ignores ``x``."""
    for t in range(spec.T):
        tab = spec.cost[t]
        for u in range(len(spec.U)):
            first = tab[0][u]
            for x in range(1, len(spec.X)):
                if tab[x][u] != first:
                    raise PreconditionError(
                        f"interim cost depends on the state: c_{t}({spec.X.labels[0]!r}, "
                        f"{spec.U.labels[u]!r}) = {first} but c_{t}({spec.X.labels[x]!r}, "
                        f"{spec.U.labels[u]!r}) = {tab[x][u]}"
                    )


class _PairMetric:
    def __init__(self, X: FiniteMetricSpace):
        self.X = X

    def __call__(self, p, q):
        return max(self.X.d(p[0], q[0]), abs(p[1] - q[1]))


class JointRangeInfo(InfoStateMap):
    """Node = the joint range of (state, accrued cost) given the memory."""

    name = "joint"

    def root_key(self, y0, r0):
        return frozenset((x, 0) for x in r0)

    def child_key(self, t, key, u, y, r):
        spec = self.spec
        cost = spec.cost[t]
        obs = spec.observable[t + 1]
        out = set()
        for x, a in key:
            a2 = a + cost[x][u]
            for x2 in spec.successors[t][x][u]:
                if y in obs[x2]:
                    out.add((x2, a2))
        return frozenset(out)

    def node_distance(self, t, a, b):
        return hausdorff(a, b, _PairMetric(self.spec.X))

    def lift(self, t, key):
        v = {}
        for x, a in key:
            if x not in v or v[x] < a:
                v[x] = a
        return v

    def label(self, key):
        return "{" + ",".join(f"({self.spec.X.labels[x]},{a})" for x, a in sorted(key)) + "}"


class MemoryInfo(InfoStateMap):
    """Node = the memory itself (no compression)."""

    name = "memory"

    def root_key(self, y0, r0):
        return Memory.root(y0)

    def child_key(self, t, key, u, y, r):
        return key.extend(u, y)

    def node_distance(self, t, a, b):
        Y, U = self.spec.Y, self.spec.U
        d = max(Y.d(p, q) for p, q in zip(a.observations, b.observations))
        if a.actions:
            d = max(d, max(U.d(p, q) for p, q in zip(a.actions, b.actions)))
        return d

    def lift(self, t, key):
        return cost_to_come(self.spec, key)

    def label(self, key):
        return key.label(self.spec)


class WindowInfo(InfoStateMap):
    """Node = the last ``length`` observations (a generally lossy compressor).

    ``declared_epsilon`` optionally states per-stage approximation errors that
    a bound check should assume instead of computing them.
    """

    name = "window"

    def __init__(self, spec: SystemSpec, length: int = 1, declared_epsilon=None):
        super().__init__(spec)
        if length < 1:
            raise ValueError("window length must be positive")
        self.length = length
        self.declared_epsilon = None if declared_epsilon is None else list(declared_epsilon)
        if self.declared_epsilon is not None and len(self.declared_epsilon) != spec.T + 1:
            raise SpecError(f"declared_epsilon needs {spec.T + 1} entries")

    def root_key(self, y0, r0):
        return (y0,)

    def child_key(self, t, key, u, y, r):
        return (key + (y,))[-self.length:]

    def node_distance(self, t, a, b):
        return max(self.spec.Y.d(p, q) for p, q in zip(a, b))

    def label(self, key):
        return " ".join(self.spec.Y.labels[y] for y in key)


class RelabeledInfo(InfoStateMap):
    """Node = an integer label assigned to each distinct normalized accrued distribution.

    ``assign[t]`` maps a distribution to its label; labels live on the integer
    line. Used to build arbitrary (usually lossy) compressors.
    """

    name = "relabeled"

    def __init__(self, spec: SystemSpec, assign: Sequence[dict]):
        super().__init__(spec)
        self.assign = assign

    def root_key(self, y0, r0):
        return self.assign[0][r0]

    def child_key(self, t, key, u, y, r):
        return self.assign[t + 1][r]

    def node_distance(self, t, a, b):
        return abs(a - b)

    def label(self, key):
        return str(key)


def random_relabeling(spec: SystemSpec, n_labels: int, rng: np.random.Generator) -> RelabeledInfo:
    """Compressor merging distributions at random into at most ``n_labels`` nodes per stage."""
    graph = QuotientGraph(spec, NormalizedAccruedInfo(spec))
    assign = []
    for t in range(spec.T + 1):
        dists = graph.r[t]
        labels = rng.integers(0, n_labels, size=len(dists))
        assign.append({r: int(k) for r, k in zip(dists, labels)})
    return RelabeledInfo(spec, assign)


# --- quantized ranges for grid problems --------------------------------------


@dataclass(frozen=True)
class Quantizer:
    """Quantization points of a cell space and the nearest-point map ``mu``."""

    space: FiniteMetricSpace
    points: tuple
    mu: tuple

    @classmethod
    def from_points(cls, space: FiniteMetricSpace, points, max_radius=1) -> "Quantizer":
        pts = tuple(sorted(set(points)))
        if not pts:
            raise SpecError("quantizer needs at least one point")
        D = space.pairwise(range(len(space)), pts)
        nearest = D.argmin(axis=1)
        mu = tuple(pts[int(j)] for j in nearest)
        if max_radius is not None:
            radius = D.min(axis=1).max()
            if radius > max_radius + (0 if space.exact else FLOAT_TOL):
                worst = int(np.argmax(np.array(D.min(axis=1), dtype=float)))
                raise SpecError(
                    f"quantizer covering radius {radius} exceeds {max_radius} "
                    f"(cell {space.labels[worst]!r} is uncovered)"
                )
        return cls(space, pts, mu)

    @classmethod
    def identity(cls, space: FiniteMetricSpace) -> "Quantizer":
        return cls(space, tuple(range(len(space))), tuple(range(len(space))))

    def __call__(self, x: int) -> int:
        return self.mu[x]

    def covering_radius(self):
        D = self.space.pairwise(range(len(self.space)), self.points)
        return D.min(axis=1).max()

    def preimage(self, pts) -> frozenset:
        pts = set(pts)
        return frozenset(x for x, q in enumerate(self.mu) if q in pts)


def grid_quantizer(
    space: FiniteMetricSpace, coords: Sequence[tuple], center: int, fine_radius: int = 2
) -> Quantizer:
    """Fine quantization near ``center``, checkerboard elsewhere.

    Every cell within Chebyshev distance ``fine_radius`` of the center is a
    quantization point; farther away only cells with the center's
    checkerboard parity are.
    """
    ci, cj = coords[center]
    parity = (ci + cj) % 2
    pts = [
        k
        for k, (i, j) in enumerate(coords)
        if max(abs(i - ci), abs(j - cj)) <= fine_radius or (i + j) % 2 == parity
    ]
    return Quantizer.from_points(space, pts)


def _set_hausdorff_matrix(D: np.ndarray, A: Sequence[frozenset], B: Sequence[frozenset], C: int):
    """Hausdorff distances between every set in ``A`` and every set in ``B``."""
    exact_int = D.dtype == object and all(float(v).is_integer() for v in D.flat)
    if D.dtype == object and not exact_int:
        out = np.empty((len(A), len(B)), dtype=object)
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                sub = D[np.ix_(sorted(a), sorted(b))]
                out[i, j] = max(sub.min(axis=1).max(), sub.min(axis=0).max())
        return out
    F = D.astype(np.int64 if exact_int else float)
    big = np.iinfo(np.int64).max // 4 if exact_int else np.inf

    def masks(sets):
        M = np.zeros((len(sets), C), dtype=bool)
        for k, s in enumerate(sets):
            M[k, list(s)] = True
        return M

    MA, MB = masks(A), masks(B)
    # to_A[i, c] = distance from cell c to set A_i
    to_A = np.where(MA[:, None, :], F[None, :, :], big).min(axis=2)
    to_B = np.where(MB[:, None, :], F[None, :, :], big).min(axis=2)
    out = np.empty((len(A), len(B)), dtype=F.dtype)
    step = max(1, 4_000_000 // max(1, len(B) * C))
    for lo in range(0, len(A), step):
        hi = min(len(A), lo + step)
        t1 = np.where(MA[lo:hi, None, :], to_B[None, :, :], -big).max(axis=2)
        t2 = np.where(MB[None, :, :], to_A[lo:hi, None, :], -big).max(axis=2)
        out[lo:hi] = np.maximum(t1, t2)
    if exact_int:
        return np.array([[int(v) for v in row] for row in out], dtype=object).reshape(out.shape)
    return out


class QuantizedRangeInfo(InfoStateMap):
    """Approximate node ``(agent cell, quantized target range, first observation)``.

    Requires a spec built by :func:`minimaxdp.gridworld.build_gridworld`.
    ``lift`` turns a node into a target range for the node-level model: the
    quantization points themselves (``lift="points"``) or every cell that
    quantizes into them (``lift="preimage"``).
    """

    name = "quantized"
    support_only = True

    def __init__(self, spec: SystemSpec, quantizer: Quantizer | None = None, lift: str = "points"):
        super().__init__(spec)
        if lift not in ("points", "preimage"):
            raise ValueError(f"unknown lift {lift!r}")
        self.lift_mode = lift
        grid = spec.meta.get("grid")
        if grid is None:
            raise PreconditionError("the quantized compressor needs a gridworld spec")
        self.cells: FiniteMetricSpace = grid.cell_space
        self.nc = len(self.cells)
        self.q = quantizer if quantizer is not None else grid.default_quantizer()
        if self.q.space is not self.cells and len(self.q.mu) != self.nc:
            raise PreconditionError("quantizer does not match the grid cells")
        # quantized target cell of every joint state
        self._qcell = [self.q.mu[x % self.nc] for x in range(len(spec.X))]
        self._cache: dict = {}

    def _key(self, r, y0):
        # child ranges recur across many parents, so quantize each range once
        tag = (frozenset(r), y0)
        key = self._cache.get(tag)
        if key is None:
            x = next(iter(r))
            key = (x // self.nc, frozenset(map(self._qcell.__getitem__, r)), y0)
            self._cache[tag] = key
        return key

    def root_key(self, y0, r0):
        return self._key(r0, y0)

    def child_key(self, t, key, u, y, r):
        return self._key(r, key[2])

    def node_distance(self, t, a, b):
        return max(
            self.cells.d(a[0], b[0]),
            hausdorff(a[1], b[1], self.cells),
            self.spec.Y.d(a[2], b[2]),
        )

    def node_pairwise(self, t, A, B):
        A, B = list(A), list(B)
        dag = self.cells.pairwise([a[0] for a in A], [b[0] for b in B])
        dy = self.spec.Y.pairwise([a[2] for a in A], [b[2] for b in B])
        dh = _set_hausdorff_matrix(self.cells.dist, [a[1] for a in A], [b[1] for b in B], self.nc)
        if dag.dtype == object and dy.dtype == object and dh.dtype == object:
            return np.maximum(np.maximum(dag, dy), dh)
        return np.maximum(np.maximum(dag.astype(float), dy.astype(float)), dh.astype(float))

    def lift(self, t, key):
        ag, pts, _ = key
        base = ag * self.nc
        cells = pts if self.lift_mode == "points" else self.q.preimage(pts)
        return dict.fromkeys((base + x for x in cells), 0)

    def label(self, key):
        ag, pts, y0 = key
        return f"ag={self.cells.labels[ag]} range={_set_label(self.cells.labels, pts)} y0={self.spec.Y.labels[y0]}"


# --- kernels -------------------------------------------------------------------


def _normalize(raw: dict) -> dict:
    top = max(raw.values())
    return {k: v - top for k, v in raw.items()}


class PooledKernel:
    """Accrued distributions conditioned on a node by pooling its memories.

    Pooling takes the max of the members' unnormalized joints (each shifted by
    its largest accrued cost) before normalizing.
    """

    kind = "pooled"

    def __init__(self, graph: QuotientGraph):
        self.graph = graph
        self.spec = graph.spec
        self.ism = graph.compressor
        self.pools: list[dict] = []
        for keys in graph.key:
            pool: dict = {}
            for i, k in enumerate(keys):
                pool.setdefault(k, []).append(i)
            self.pools.append(pool)
        self._trans: dict = {}
        self._term: dict = {}

    def roots(self) -> list:
        return list(self.pools[0])

    def keys(self, t: int) -> list:
        return list(self.pools[t])

    def member_transition(self, t: int, i: int, u: int) -> dict:
        """``r_t(x, node' | m, u)`` for memory class ``i`` (already normalized)."""
        g = self.graph
        kids = g.children[t][i][u]
        nxt = g.key[t + 1]
        reach = self.spec.reachable_observations[t]
        return {(x, nxt[kids[y]]): v for x, v in g.r[t][i].items() for y in reach[x][u]}

    def transition(self, t: int, key, u: int) -> dict:
        hit = self._trans.get((t, key, u))
        if hit is not None:
            return hit
        g = self.graph
        raw: dict = {}
        for i in self.pools[t][key]:
            off = g.offset[t][i]
            for k, v in self.member_transition(t, i, u).items():
                s = v + off
                old = raw.get(k)
                if old is None or s > old:
                    raw[k] = s
        out = _normalize(raw)
        self._trans[(t, key, u)] = out
        return out

    def terminal(self, key, t: int | None = None) -> dict:
        t = self.spec.T if t is None else t
        hit = self._term.get((t, key))
        if hit is not None:
            return hit
        g = self.graph
        raw: dict = {}
        for i in self.pools[t][key]:
            off = g.offset[t][i]
            for x, v in g.r[t][i].items():
                s = v + off
                if x not in raw or raw[x] < s:
                    raw[x] = s
        out = _normalize(raw)
        self._term[(t, key)] = out
        return out


class ModelKernel:
    """Accrued distributions computed from a node's own surrogate distribution."""

    kind = "model"

    def __init__(self, spec: SystemSpec, ism: InfoStateMap):
        self.spec = spec
        self.ism = ism
        self._trans: dict = {}
        self._lift: dict = {}

    def roots(self) -> list:
        out = []
        for y in self.spec.root_observations():
            r0 = CostDistribution.normalized(self.spec.initial_cost_to_come(y))
            k = self.ism.root_key(y, r0)
            if k not in out:
                out.append(k)
        return out

    def _lifted(self, t, key):
        hit = self._lift.get((t, key))
        if hit is None:
            hit = self.ism.lift(t, key)
            if not hit:
                raise PreconditionError(f"node {self.ism.label(key)} lifts to an empty range")
            self._lift[(t, key)] = hit
        return hit

    def transition(self, t: int, key, u: int) -> dict:
        hit = self._trans.get((t, key, u))
        if hit is not None:
            return hit
        v = self._lifted(t, key)
        children, reach = propagate(self.spec, t, v, u)
        child_keys = {}
        ism = self.ism
        for y, raw in children.items():
            if not ism.support_only:
                top = max(raw.values())
                raw = CostDistribution({x: a - top for x, a in raw.items()}, check=False)
            child_keys[y] = ism.child_key(t, key, u, y, raw)
        raw = {}
        for x, a in v.items():
            for y in reach[x]:
                k = (x, child_keys[y])
                if k not in raw or raw[k] < a:
                    raw[k] = a
        out = _normalize(raw)
        self._trans[(t, key, u)] = out
        return out

    def terminal(self, key, t: int | None = None) -> dict:
        t = self.spec.T if t is None else t
        return _normalize(self._lifted(t, key))


def make_kernel(spec: SystemSpec, ism: InfoStateMap, kind: str = "pooled", graph: QuotientGraph | None = None):
    if kind == "pooled":
        return PooledKernel(graph if graph is not None else QuotientGraph(spec, ism))
    if kind == "model":
        return ModelKernel(spec, ism)
    raise ValueError(f"unknown kernel {kind!r}")


# --- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    counterexample: dict | None = None

    def __bool__(self):
        return self.ok


def _same(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    return all(eq(a[k], b[k]) for k in a)


def validate_info_state(spec: SystemSpec, ism: InfoStateMap, graph: QuotientGraph | None = None) -> ValidationResult:
    """Check that conditioning on the node reproduces conditioning on the memory.

    Every memory class and action is compared: the joint accrued distribution
    over (state, next node) and, at the final stage, the accrued distribution
    over states. The first mismatch is returned as a counterexample.
    """
    graph = graph if graph is not None else QuotientGraph(spec, ism)
    kernel = PooledKernel(graph)
    for t in range(spec.T):
        for i, key in enumerate(graph.key[t]):
            for u in range(len(spec.U)):
                mine = kernel.member_transition(t, i, u)
                pooled = kernel.transition(t, key, u)
                if not _same(mine, pooled):
                    return ValidationResult(
                        False,
                        {"t": t, "node": ism.label(key), "action": spec.U.labels[u],
                         "memory_class": i, "memory_joint": mine, "node_joint": pooled},
                    )
    T = spec.T
    for i, key in enumerate(graph.key[T]):
        mine = dict(graph.r[T][i])
        pooled = kernel.terminal(key)
        if not _same(mine, pooled):
            return ValidationResult(
                False,
                {"t": T, "node": ism.label(key), "memory_class": i,
                 "memory_dist": mine, "node_dist": pooled},
            )
    return ValidationResult(True)


def normalized_accrued_info(spec):
    return NormalizedAccruedInfo(spec)


def perfect_observation_info(spec):
    return PerfectObservationInfo(spec)


def conditional_range_info(spec):
    return ConditionalRangeInfo(spec)


def joint_range_info(spec):
    return JointRangeInfo(spec)


def quantized_range_info(spec, quantizer=None):
    return QuantizedRangeInfo(spec, quantizer)


def make_info(spec: SystemSpec, name: str, **options) -> InfoStateMap:
    """Compressor by CLI name: case1, case2, case3, joint, memory, quantized or window."""
    table = {
        "case1": NormalizedAccruedInfo,
        "case2": PerfectObservationInfo,
        "case3": ConditionalRangeInfo,
        "joint": JointRangeInfo,
        "memory": MemoryInfo,
        "quantized": QuantizedRangeInfo,
        "window": WindowInfo,
    }
    try:
        cls = table[name]
    except KeyError:
        raise ValueError(f"unknown compressor {name!r}") from None
    return cls(spec, **options)
