"""Exact time values.

All simulated time is a :class:`fractions.Fraction`; on disk it is written as a
``"num/den"`` string so that files round-trip without rounding.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

from .errors import InvalidParameter

Time = Fraction

ZERO = Fraction(0)


def as_time(value) -> Fraction:
    """Coerce ``value`` to an exact :class:`Fraction`.

    Accepts ints, Fractions and strings such as ``"3"``, ``"7/2"``.  Floats
    are rejected because they silently carry binary rounding.
    """
    if isinstance(value, bool):
        raise InvalidParameter(f"not a time value: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"bad rational {value!r}") from exc
    raise InvalidParameter(f"time must be int, Fraction or 'num/den' string, got {type(value).__name__}")


def fmt_time(t: Fraction) -> str:
    return f"{t.numerator}/{t.denominator}"
