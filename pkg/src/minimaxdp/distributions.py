"""Max-plus cost distributions over finite sets.

A distribution maps points to values in ``[-a_max, 0]``; a point missing from
the mapping has value minus infinity. Every distribution is normalized so
that its largest value is exactly 0.
"""
from __future__ import annotations

from collections.abc import Mapping
from typing import Callable, Hashable, Iterable

import numpy as np

from .errors import ConditioningError, DomainError
from .numeric import Number
from .sets import FiniteMetricSpace, pairwise

NEG_INF = float("-inf")


def _py(x):
    return x.item() if isinstance(x, np.generic) else x


def _call(g):
    if isinstance(g, Mapping):
        return g.__getitem__
    return g


class CostDistribution(Mapping):
    """Immutable normalized mapping ``point -> value``.

    >>> q = CostDistribution({"a": 0, "b": -1})
    >>> q.value("c")
    -inf
    """

    __slots__ = ("_values", "_hash")

    def __init__(self, values: Mapping, *, check: bool = True):
        vals = dict(values)
        if not vals:
            raise DomainError("a cost distribution needs a nonempty support")
        if check:
            top = max(vals.values())
            if top != 0:
                raise DomainError(f"distribution is not normalized (max value {top})")
        self._values = vals
        self._hash = None

    @classmethod
    def normalized(cls, raw: Mapping) -> "CostDistribution":
        """Shift an unnormalized finite mapping so its maximum is 0."""
        if not raw:
            raise ConditioningError("cannot normalize an empty support")
        top = max(raw.values())
        return cls({k: v - top for k, v in raw.items()}, check=False)

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._values.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, CostDistribution):
            return self._values == other._values
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {v}" for k, v in sorted(self._values.items(), key=lambda kv: repr(kv[0])))
        return f"{type(self).__name__}({{{inner}}})"

    @property
    def support(self) -> frozenset:
        return frozenset(self._values)

    def value(self, x) -> Number:
        return self._values.get(x, NEG_INF)

    @property
    def floor(self) -> Number:
        """``-a_max``: the smallest finite value."""
        return min(self._values.values())


class JointCostDistribution(CostDistribution):
    """Cost distribution whose points are pairs ``(x, y)``."""

    __slots__ = ()

    def __init__(self, values: Mapping, *, check: bool = True):
        super().__init__(values, check=check)
        for k in self._values:
            if not (isinstance(k, tuple) and len(k) == 2):
                raise DomainError(f"joint distribution point {k!r} is not a pair")

    def marginal(self, axis: int = 0) -> CostDistribution:
        return pushforward(self, lambda p: p[axis])


def indicator(rng: Iterable, space: FiniteMetricSpace | None = None) -> CostDistribution:
    """0 on the range, minus infinity elsewhere."""
    pts = set(rng)
    if not pts:
        raise DomainError("indicator of an empty range")
    if space is not None:
        bad = [p for p in pts if not (isinstance(p, int) and 0 <= p < len(space))]
        if bad:
            raise DomainError(f"points {bad} are not in the space")
    return CostDistribution({p: 0 for p in pts}, check=False)


def condition(joint: Mapping, y: Hashable) -> CostDistribution:
    """``q(x | y) = q(x, y) - q(y)``."""
    raw = {x: v for (x, yy), v in joint.items() if yy == y}
    if not raw:
        raise ConditioningError(f"q({y!r}) is -inf; conditioning is infeasible")
    return CostDistribution.normalized(raw)


def pushforward(q: Mapping, f) -> CostDistribution:
    """Image distribution ``q'(y) = max {q(x) : f(x) = y}``."""
    f = _call(f)
    out: dict = {}
    for x, v in q.items():
        y = f(x)
        if y not in out or out[y] < v:
            out[y] = v
    cls = JointCostDistribution if all(isinstance(k, tuple) and len(k) == 2 for k in out) else CostDistribution
    return cls(out)


def max_functional(q: Mapping, g) -> Number:
    """``max_x (g(x) + q(x))`` over the support of ``q``."""
    g = _call(g)
    return max(g(x) + v for x, v in q.items())


def accrued_distribution(joint) -> CostDistribution:
    """Accrued distribution ``r(x)`` from a joint over ``(x, a)``.

    ``joint`` is either a cost distribution over ``(x, a)`` pairs (normally the
    indicator of a joint range) or an iterable of feasible ``(x, a)`` pairs.
    ``r(x) = max_a (a + q(x, a)) - max_{x, a} (a + q(x, a))``.
    """
    items = joint.items() if isinstance(joint, Mapping) else ((p, 0) for p in joint)
    raw: dict = {}
    for (x, a), v in items:
        if a < 0:
            raise DomainError(f"accrued cost {a} is negative")
        s = a + v
        if x not in raw or raw[x] < s:
            raw[x] = s
    if not raw:
        raise ConditioningError("empty joint range")
    return CostDistribution.normalized(raw)


def _sorted_points(pts):
    return sorted(pts)


def distribution_distance(r: Mapping, q: Mapping, space, tie_break: str = "lowest") -> Number:
    """Distance between two cost distributions on one metric space.

    The larger of the Hausdorff distance between the supports and the
    largest value gap between the nearest supported points of each
    distribution. Nearest-point ties go to the lowest point
    (``tie_break="lowest"``), or to the pair with the largest (``"worst"``)
    or smallest (``"best"``) value gap.
    """
    if tie_break not in ("lowest", "worst", "best"):
        raise ValueError(f"unknown tie_break {tie_break!r}")
    Xr = _sorted_points(r)
    Xq = _sorted_points(q)
    if not Xr or not Xq:
        raise DomainError("distribution with empty support")
    U = _sorted_points(set(Xr) | set(Xq))
    pos = {p: i for i, p in enumerate(U)}
    Dr = pairwise(space, U, Xr)
    Dq = pairwise(space, U, Xq)
    h = max(
        Dq[[pos[p] for p in Xr]].min(axis=1).max(),
        Dr[[pos[p] for p in Xq]].min(axis=1).max(),
    )
    rv = [r[p] for p in Xr]
    qv = [q[p] for p in Xq]
    if tie_break == "lowest":
        ar = Dr.argmin(axis=1)
        aq = Dq.argmin(axis=1)
        gap = max(abs(rv[i] - qv[j]) for i, j in zip(ar, aq))
    else:
        pick = max if tie_break == "worst" else min
        mr = Dr.min(axis=1)
        mq = Dq.min(axis=1)
        gap = 0
        for k in range(len(U)):
            cr = [rv[i] for i in np.flatnonzero(Dr[k] == mr[k])]
            cq = [qv[j] for j in np.flatnonzero(Dq[k] == mq[k])]
            gap = max(gap, pick(abs(a - b) for a in cr for b in cq))
    return _py(max(h, gap))


def lipschitz_constant(g, space, points: Iterable | None = None) -> Number:
    """``max |g(a) - g(b)| / d(a, b)`` over distinct points (0 for one point).

    ``points`` defaults to every point of a ``FiniteMetricSpace``.
    """
    g = _call(g)
    if points is None:
        points = range(len(space))
    pts = list(points)
    if len(pts) < 2:
        return 0
    vals = [g(p) for p in pts]
    D = pairwise(space, pts, pts)
    if D.dtype == object and not any(isinstance(v, float) for v in vals):
        best = 0
        n = len(pts)
        for i in range(n):
            vi = vals[i]
            row = D[i]
            for j in range(i + 1, n):
                ratio = abs(vi - vals[j]) / row[j]
                if ratio > best:
                    best = ratio
        return best
    V = np.asarray(vals, dtype=float)
    Df = np.array(D, dtype=float)
    np.fill_diagonal(Df, 1.0)
    return float((np.abs(V[:, None] - V[None, :]) / Df).max())


def lemma2_gap(g, r: Mapping, q: Mapping, space, tie_break: str = "lowest", points=None):
    """Both sides of the Lipschitz perturbation bound for max-plus expectations.

    Returns ``(lhs, bound)`` with ``lhs = |max(g + r) - max(g + q)|`` and
    ``bound = (L_g + 1) * distance(r, q)``; ``lhs <= bound`` always holds.
    """
    if points is None and not isinstance(space, FiniteMetricSpace):
        points = set(r) | set(q)
    lhs = abs(max_functional(r, g) - max_functional(q, g))
    L = lipschitz_constant(g, space, points)
    return lhs, (L + 1) * distribution_distance(r, q, space, tie_break)
