"""JSON problem files and the shipped DESK-1 fixture.

A problem document looks like::

    {
      "name": "DESK-1",
      "horizon": 1,
      "spaces": {
        "X": {"points": ["a", "b"], "metric": "discrete"},
        "Y": {"points": ["p", "q"], "metric": "explicit",
              "distances": [["0", "1"], ["1", "0"]]},
        "G": {"points": ["c0", "c1"], "metric": "euclidean",
              "coordinates": [[0, 0], [3, 4]]},
        ...
      },
      "initial_range": ["a", "b"],
      "dynamics":    [{"t": 0, "x": "a", "u": "l", "w": "w", "output": "a"}, ...],
      "observation": [{"t": 0, "x": "a", "n": "n0", "output": "p"}, ...],
      "cost":        [{"t": 0, "x": "a", "u": "l", "output": "0"}, ...]
    }

Spaces ``X U Y W N`` are required. In table records an omitted field, or the
value ``"*"``, matches every point (or every stage for ``t``); records are
applied in order so later ones override earlier ones. Numbers are exact
decimals or rationals given as strings; JSON floats are accepted but switch
the problem to float arithmetic.

A document with a ``gridworld`` section is built by
:func:`minimaxdp.gridworld.build_gridworld` instead. An optional
``compressor`` section configures the observation-window compressor used by
``check-bounds``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import SpecError
from .numeric import parse_number
from .sets import FiniteMetricSpace
from .system import SystemSpec

SPACE_NAMES = ("X", "U", "Y", "W", "N")
_TABLE_FIELDS = {
    "dynamics": ("x", "u", "w"),
    "observation": ("x", "n"),
    "cost": ("x", "u"),
}


@dataclass(frozen=True)
class Problem:
    spec: SystemSpec
    grid: Any = None
    compressor: Mapping = field(default_factory=dict)
    source: Mapping = field(default_factory=dict, repr=False)


def parse_space(name: str, doc: Mapping) -> FiniteMetricSpace:
    try:
        labels = [str(p) for p in doc["points"]]
    except (KeyError, TypeError):
        raise SpecError(f"space {name!r} needs a 'points' list") from None
    metric = doc.get("metric", "discrete")
    if metric == "discrete":
        return FiniteMetricSpace.discrete(labels)
    if metric == "explicit":
        rows = doc.get("distances")
        if rows is None:
            raise SpecError(f"space {name!r}: explicit metric needs 'distances'")
        try:
            D = [[parse_number(v) for v in row] for row in rows]
        except ValueError as exc:
            raise SpecError(f"space {name!r}: {exc}") from None
        try:
            return FiniteMetricSpace(tuple(labels), D)
        except SpecError as exc:
            raise SpecError(f"space {name!r}: {exc}") from None
    if metric in ("euclidean", "manhattan", "chebyshev"):
        coords = doc.get("coordinates")
        if coords is None:
            raise SpecError(f"space {name!r}: {metric} metric needs 'coordinates'")
        coords = [[parse_number(c) for c in row] for row in coords]
        return FiniteMetricSpace.from_coordinates(labels, coords, metric)
    raise SpecError(f"space {name!r}: unknown metric {metric!r}")


def _expand(value, space: FiniteMetricSpace | None, n: int, what: str):
    if value is None or value == "*":
        return range(n)
    if space is None:
        if not (isinstance(value, int) and 0 <= value < n):
            raise SpecError(f"{what}: stage {value!r} outside 0..{n - 1}")
        return (value,)
    try:
        return (space.index(value),)
    except Exception:
        raise SpecError(f"{what}: unknown point {value!r}") from None


def _fill_table(records, kind, spaces, stages, out_space):
    fields = _TABLE_FIELDS[kind]
    shape = [len(spaces[f.upper()]) for f in fields]
    tab = [_nested(shape) for _ in range(stages)]
    for k, rec in enumerate(records):
        where = f"{kind} record {k}"
        if "output" not in rec:
            raise SpecError(f"{where}: missing 'output'")
        if out_space is None:
            try:
                out = parse_number(rec["output"])
            except ValueError as exc:
                raise SpecError(f"{where}: {exc}") from None
        else:
            try:
                out = out_space.index(rec["output"])
            except Exception:
                raise SpecError(f"{where}: unknown output point {rec['output']!r}") from None
        for t in _expand(rec.get("t"), None, stages, where):
            axes = [_expand(rec.get(f), spaces[f.upper()], len(spaces[f.upper()]), where) for f in fields]
            _assign(tab[t], axes, out)
    for t, stage in enumerate(tab):
        missing = _first_missing(stage, ())
        if missing is not None:
            idx = " ".join(
                f"{f}={spaces[f.upper()].labels[i]!r}" for f, i in zip(fields, missing)
            )
            raise SpecError(f"{kind} is not total: no entry for t={t} {idx}")
    return tuple(tab)


def _nested(shape):
    if len(shape) == 1:
        return [None] * shape[0]
    return [_nested(shape[1:]) for _ in range(shape[0])]


def _assign(tab, axes, out):
    if len(axes) == 1:
        for i in axes[0]:
            tab[i] = out
        return
    for i in axes[0]:
        _assign(tab[i], axes[1:], out)


def _first_missing(tab, prefix):
    for i, v in enumerate(tab):
        if isinstance(v, list):
            hit = _first_missing(v, prefix + (i,))
            if hit is not None:
                return hit
        elif v is None:
            return prefix + (i,)
    return None


def spec_from_dict(doc: Mapping) -> SystemSpec:
    """Build and validate a :class:`SystemSpec` from a parsed problem document."""
    try:
        T = doc["horizon"]
        spaces_doc = doc["spaces"]
    except KeyError as exc:
        raise SpecError(f"problem is missing field {exc.args[0]!r}") from None
    if not isinstance(T, int) or isinstance(T, bool) or T < 0:
        raise SpecError(f"horizon must be a nonnegative integer, got {T!r}")
    spaces = {}
    for name in SPACE_NAMES:
        if name not in spaces_doc:
            raise SpecError(f"problem is missing space {name!r}")
        spaces[name] = parse_space(name, spaces_doc[name])
    X = spaces["X"]
    try:
        x0 = frozenset(X.index(p) for p in doc["initial_range"])
    except KeyError:
        raise SpecError("problem is missing field 'initial_range'") from None
    except Exception as exc:
        raise SpecError(f"initial_range: {exc}") from None
    y0 = None
    if doc.get("initial_observations") is not None:
        y0 = frozenset(spaces["Y"].index(p) for p in doc["initial_observations"])
    dyn = _fill_table(doc.get("dynamics", []), "dynamics", spaces, T, X)
    obs = _fill_table(doc.get("observation", []), "observation", spaces, T + 1, spaces["Y"])
    cost = _fill_table(doc.get("cost", []), "cost", spaces, T + 1, None)
    return SystemSpec(
        T, X, spaces["U"], spaces["Y"], spaces["W"], spaces["N"], x0, dyn, obs, cost,
        initial_observations=y0, name=str(doc.get("name", "")),
    )


def problem_from_dict(doc: Mapping) -> Problem:
    if "gridworld" in doc:
        from .gridworld import GridConfig, build_gridworld

        cfg = GridConfig.from_dict(doc["gridworld"])
        return Problem(build_gridworld(cfg), cfg, doc.get("compressor", {}), doc)
    return Problem(spec_from_dict(doc), None, doc.get("compressor", {}), doc)


def load_problem(path) -> Problem:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(doc)


def _discrete(*labels):
    return {"points": list(labels), "metric": "discrete"}


DESK1: dict = {
    "name": "DESK-1",
    "horizon": 1,
    "spaces": {
        "X": _discrete("a", "b"),
        "U": _discrete("l", "r"),
        "Y": _discrete("p", "q"),
        "W": _discrete("w"),
        "N": _discrete("n0", "n1"),
    },
    "initial_range": ["a", "b"],
    "dynamics": [
        {"x": "a", "u": "l", "output": "a"},
        {"x": "b", "u": "l", "output": "b"},
        {"x": "a", "u": "r", "output": "b"},
        {"x": "b", "u": "r", "output": "a"},
    ],
    "observation": [
        {"x": "a", "n": "n0", "output": "p"},
        {"x": "a", "n": "n1", "output": "q"},
        {"x": "b", "output": "q"},
    ],
    "cost": [
        {"t": 0, "x": "a", "u": "l", "output": "0"},
        {"t": 0, "x": "a", "u": "r", "output": "2"},
        {"t": 0, "x": "b", "u": "l", "output": "1"},
        {"t": 0, "x": "b", "u": "r", "output": "0"},
        {"t": 1, "x": "a", "u": "l", "output": "3"},
        {"t": 1, "x": "a", "u": "r", "output": "0"},
        {"t": 1, "x": "b", "u": "l", "output": "0"},
        {"t": 1, "x": "b", "u": "r", "output": "1"},
    ],
}


def desk1() -> SystemSpec:
    """Two states, two actions, two observations, one step: every value is hand-checkable."""
    return spec_from_dict(DESK1)


def desk1_document() -> dict:
    return copy.deepcopy(DESK1)


def dump_problem(doc: Mapping, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
