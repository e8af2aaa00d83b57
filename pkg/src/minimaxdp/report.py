"""CSV output for value tables, bound reports and benchmark results.

Every file is UTF-8 CSV with RFC-4180 quoting and CRLF line ends. Numbers go
through :func:`minimaxdp.numeric.fmt`, so the ``arith`` mode decides between
lossless ``p/q`` text and 12-significant-digit decimals.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .dp import ValueTable
from .numeric import fmt

NEG_INF = "-inf"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def _num(x, arith: str) -> str:
    return "" if x is None else fmt(x, arith)


def distribution_rows(r, space, arith: str = "exact"):
    """``(point label, value)`` for every point, ``-inf`` off the support."""
    for x, lab in enumerate(space.labels):
        v = r.get(x)
        yield lab, (NEG_INF if v is None else fmt(v, arith))


def write_values(path, table: ValueTable, label: Callable, action_labels: Sequence[str], arith: str):
    """Rows ``(stage, node, action, value)``; ``V`` rows leave the action blank."""
    rows = (
        (t, node, "" if u is None else action_labels[u], fmt(v, arith))
        for t, node, u, v in table.rows(label)
    )
    return write_csv(path, ("stage", "node", "action", "value"), rows)


def write_law(path, table: ValueTable, label: Callable, action_labels: Sequence[str]):
    rows = (
        (t, label(n), action_labels[table.law[t][i]])
        for t, ns in enumerate(table.nodes)
        for i, n in enumerate(ns)
    )
    return write_csv(path, ("stage", "node", "action"), rows)


def write_summary(path, items: Iterable[tuple]):
    """Two-column ``(field, value)`` file; values are written as given."""
    return write_csv(path, ("field", "value"), items)


def write_stage_values(path, values: Sequence, arith: str = "exact", name: str = "value"):
    return write_csv(path, ("stage", name), ((t, _num(v, arith)) for t, v in enumerate(values)))


def bound_rows(sweep, arith: str):
    rep = sweep.report
    for (t, eps, Lc, LV, L, alpha), gv, gq, gl, gth in zip(
        rep.rows(), sweep.gap_V, sweep.gap_Q, sweep.gap_Lambda, sweep.gap_Theta
    ):
        yield (
            t, _num(sweep.computed_eps[t], arith), _num(eps, arith), _num(Lc, arith),
            _num(LV, arith), _num(L, arith), _num(alpha, arith),
            _num(gv, arith), _num(gq, arith), _num(gl, arith), _num(gth, arith),
        )


BOUND_HEADER = (
    "stage", "eps", "eps_used", "L_c", "L_V", "L", "alpha",
    "gap_V", "gap_Q", "gap_Lambda", "gap_Theta",
)


def write_bounds(path, sweep, arith: str = "exact"):
    """Per-stage errors, Lipschitz constants, ``alpha`` and the largest observed gaps.

    ``eps`` is the computed error and ``eps_used`` the one the bounds were built
    from (they differ only when errors were declared).
    """
    return write_csv(path, BOUND_HEADER, bound_rows(sweep, arith))


def sweep_items(sweep):
    return [
        ("value_bound", "pass" if sweep.ok_value else "fail"),
        ("performance_bound", "pass" if sweep.ok_performance else "fail"),
        ("declared_epsilon", "pass" if sweep.ok_declared else "fail"),
    ]


BENCH_HEADER = (
    "case", "x0_ag", "y0", "V0", "Vhat0", "alpha0", "runtime_exact_s", "runtime_approx_s",
)


def bench_rows(result, arith: str = "exact"):
    for c in result.cases:
        yield (
            c.case_id, f"({c.agent_start[0]},{c.agent_start[1]})", f"({c.y0[0]},{c.y0[1]})",
            fmt(c.V0, arith), fmt(c.Vhat0, arith), fmt(c.alpha0, arith),
            f"{c.runtime_exact:.6f}", f"{c.runtime_approx:.6f}",
        )


def write_bench(path, result, arith: str = "exact"):
    return write_csv(path, BENCH_HEADER, bench_rows(result, arith))


def write_hist(path, result, arith: str = "exact"):
    return write_csv(
        path, ("cost_difference", "frequency"),
        ((fmt(d, arith), n) for d, n in result.histogram()),
    )
