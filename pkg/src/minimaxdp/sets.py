"""Finite metric spaces, ranges of uncertain variables and the Hausdorff distance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, SpecError
from .numeric import FLOAT_TOL, Number, exact_sqrt, is_exact

# Largest space whose triangle inequality is checked with exact arithmetic.
_EXACT_CHECK_LIMIT = 64


class Point(NamedTuple):
    id: int
    label: str


def _as_matrix(dist) -> np.ndarray:
    rows = [list(r) for r in dist]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise SpecError("distance table is not square")
    flat = [v for r in rows for v in r]
    if all(is_exact(v) for v in flat):
        arr = np.empty((n, n), dtype=object)
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                arr[i, j] = v
        return arr
    return np.array(rows, dtype=float).reshape(n, n)


def check_metric(D: np.ndarray, labels: Sequence[str] = ()) -> None:
    """Raise ``SpecError`` naming the first index tuple that breaks a metric axiom."""
    n = D.shape[0]
    exact = D.dtype == object
    tol = 0 if exact else FLOAT_TOL

    def name(i):
        return f"{i}({labels[i]})" if labels else str(i)

    for i in range(n):
        if D[i, i] != 0:
            raise SpecError(f"d({name(i)},{name(i)}) = {D[i, i]} is not zero")
    for i, j in itertools.combinations(range(n), 2):
        if D[i, j] != D[j, i] and not (not exact and abs(D[i, j] - D[j, i]) <= tol):
            raise SpecError(f"asymmetric distance between {name(i)} and {name(j)}")
        if D[i, j] <= 0:
            raise SpecError(f"d({name(i)},{name(j)}) = {D[i, j]} is not positive")
    if exact and n <= _EXACT_CHECK_LIMIT:
        for b in range(n):
            for a in range(n):
                dab = D[a, b]
                for c in range(n):
                    if D[a, c] > dab + D[b, c]:
                        raise SpecError(
                            f"triangle inequality violated at ({name(a)},{name(b)},{name(c)})"
                        )
        return
    F = D.astype(float)
    for b in range(n):
        viol = F > F[:, b][:, None] + F[b, :][None, :] + FLOAT_TOL
        if viol.any():
            a, c = map(int, np.argwhere(viol)[0])
            raise SpecError(f"triangle inequality violated at ({name(a)},{name(b)},{name(c)})")


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Labeled points ``0..n-1`` with a total distance table.

    The metric axioms are verified on construction unless ``check=False``
    (used for spaces that are metric by construction, e.g. products).
    """

    labels: tuple[str, ...]
    dist: np.ndarray = field(repr=False)
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        if len(set(labels)) != len(labels):
            raise SpecError("point labels are not unique")
        D = self.dist if isinstance(self.dist, np.ndarray) else _as_matrix(self.dist)
        if D.shape != (len(labels), len(labels)):
            raise SpecError(f"distance table shape {D.shape} does not match {len(labels)} points")
        D.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(labels)})
        if self.check:
            check_metric(D, labels)

    def __len__(self):
        return len(self.labels)

    @property
    def exact(self) -> bool:
        return self.dist.dtype == object

    @property
    def points(self) -> list[Point]:
        return [Point(i, s) for i, s in enumerate(self.labels)]

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise DomainError(f"unknown point {label!r}") from None

    def d(self, a: int, b: int) -> Number:
        v = self.dist[a, b]
        return v.item() if isinstance(v, np.generic) else v

    __call__ = d

    def pairwise(self, A: Sequence[int], B: Sequence[int]) -> np.ndarray:
        return self.dist[np.ix_(np.asarray(A, dtype=int), np.asarray(B, dtype=int))]

    @classmethod
    def discrete(cls, labels: Sequence[str]) -> "FiniteMetricSpace":
        n = len(labels)
        D = [[0 if i == j else 1 for j in range(n)] for i in range(n)]
        return cls(tuple(labels), D, check=False)

    @classmethod
    def from_coordinates(
        cls, labels: Sequence[str], coords: Sequence[Sequence[Number]], metric: str = "euclidean"
    ) -> "FiniteMetricSpace":
        """Points embedded in R^k under the euclidean, manhattan or chebyshev metric.

        Euclidean distances are exact when the squared distance is a perfect
        square of an integer; otherwise the whole table is stored as floats.
        """
        pts = [tuple(c) for c in coords]
        if len(pts) != len(labels):
            raise SpecError("coordinate list length does not match point list")
        if metric not in ("euclidean", "manhattan", "chebyshev"):
            raise SpecError(f"unknown metric {metric!r}")
        D = []
        for p in pts:
            row = []
            for q in pts:
                diffs = [abs(a - b) for a, b in zip(p, q)]
                if metric == "manhattan":
                    row.append(sum(diffs))
                elif metric == "chebyshev":
                    row.append(max(diffs, default=0))
                else:
                    s = sum(x * x for x in diffs)
                    if is_exact(s) and s == int(s):
                        row.append(exact_sqrt(int(s)))
                    else:
                        row.append(float(s) ** 0.5)
            D.append(row)
        return cls(tuple(labels), D)


def product_space(spaces: Sequence[FiniteMetricSpace]) -> FiniteMetricSpace:
    """Cartesian product under the max of component distances.

    Point ids are row-major (the last component varies fastest); labels join
    component labels with ``|``.
    """
    if not spaces:
        raise DomainError("product of an empty list of spaces")
    if len(spaces) == 1:
        return spaces[0]
    sizes = [len(s) for s in spaces]
    grids = np.indices(sizes).reshape(len(spaces), -1)
    labels = ["|".join(s.labels[i] for s, i in zip(spaces, col)) for col in grids.T]
    exact = all(s.exact for s in spaces)
    D = None
    for s, idx in zip(spaces, grids):
        comp = s.dist[np.ix_(idx, idx)]
        if not exact:
            comp = comp.astype(float)
        D = comp if D is None else np.maximum(D, comp)
    if exact:
        D = D.astype(object)
    return FiniteMetricSpace(tuple(labels), D, check=False)


@dataclass(frozen=True)
class RangeRelation:
    """Feasible pairs ``(x, y)`` of two uncertain variables (their joint range)."""

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    pairs: frozenset

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        for x, y in self.pairs:
            if not (0 <= x < len(self.domain) and 0 <= y < len(self.codomain)):
                raise DomainError(f"pair {(x, y)} outside its spaces")

    def marginal(self, axis: int = 0) -> frozenset:
        return frozenset(p[axis] for p in self.pairs)


def conditional_range(rel: RangeRelation, y: int) -> frozenset:
    """``[[X | y]]``; empty when ``y`` is not realizable."""
    if not 0 <= y < len(rel.codomain):
        raise DomainError(f"{y!r} is not a point of the codomain space")
    return frozenset(x for x, yy in rel.pairs if yy == y)


Metric = Callable[[Hashable, Hashable], Number]


def pairwise(metric, A: Sequence, B: Sequence) -> np.ndarray:
    """Distance matrix between two point lists under ``metric``.

    Uses the metric's own vectorized ``pairwise`` when it has one.
    """
    fn = getattr(metric, "pairwise", None)
    if fn is not None:
        return fn(A, B)
    out = np.empty((len(A), len(B)), dtype=object)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = metric(a, b)
    if all(is_exact(v) for v in out.flat):
        return out
    return out.astype(float)


def hausdorff(A: Iterable, B: Iterable, space) -> Number:
    """Hausdorff distance between two nonempty finite subsets of ``space``."""
    A = sorted(set(A))
    B = sorted(set(B))
    if not A or not B:
        raise DomainError("Hausdorff distance needs nonempty sets")
    D = pairwise(space, A, B)
    return max(D.min(axis=1).max(), D.min(axis=0).max())


class ProductMetric:
    """Max-combination metric on tuples, one component metric per position."""

    def __init__(self, *metrics):
        self.metrics = metrics

    def __call__(self, a, b):
        return max(m(x, y) for m, x, y in zip(self.metrics, a, b))

    def pairwise(self, A, B):
        out = None
        for k, m in enumerate(self.metrics):
            comp = pairwise(m, [a[k] for a in A], [b[k] for b in B])
            if out is None:
                out = comp
            elif out.dtype == object and comp.dtype == object:
                out = np.maximum(out, comp)
            else:
                out = np.maximum(out.astype(float), comp.astype(float))
        return out
