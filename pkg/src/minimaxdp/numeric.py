"""Number parsing, formatting and comparison.

Values are exact (``int`` / ``Fraction``) unless some input is irrational
(e.g. Euclidean distances on a grid), in which case floats are used and
comparisons fall back to an absolute tolerance of ``FLOAT_TOL``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, float]

FLOAT_TOL = 1e-9


def is_exact(x) -> bool:
    return isinstance(x, Rational)


def parse_number(value) -> Number:
    """Parse ``"3"``, ``"-0.25"``, ``"1/3"``, ints or floats.

    Strings and ints become exact ``Fraction`` values; floats stay floats.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number: {value!r}")
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not an exact decimal or rational: {value!r}") from exc
    raise ValueError(f"not a number: {value!r}")


def to_float(x: Number) -> float:
    return float(x)


def exact_sqrt(n: int) -> Number:
    """Square root of a nonnegative integer; exact when it is a perfect square."""
    r = math.isqrt(n)
    if r * r == n:
        return Fraction(r)
    return math.sqrt(n)


def tol_for(*values) -> float:
    return 0 if all(is_exact(v) for v in values) else FLOAT_TOL


def le(a: Number, b: Number) -> bool:
    """``a <= b``, exactly for rationals, within ``FLOAT_TOL`` otherwise."""
    return a <= b + tol_for(a, b)


def eq(a: Number, b: Number) -> bool:
    return abs(a - b) <= tol_for(a, b)


def fmt(x: Number, arith: str = "exact") -> str:
    """Render a value for CSV output.

    ``exact`` prints rationals as ``p/q`` (``p`` for integers) and floats with
    full round-trip precision; ``float`` prints 12 significant digits.
    """
    if arith == "float":
        return f"{float(x):.12g}"
    if is_exact(x):
        f = Fraction(x)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return repr(float(x))


def as_arith(x: Number, arith: str) -> Number:
    return float(x) if arith == "float" else x
