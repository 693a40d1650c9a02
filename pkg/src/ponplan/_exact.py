"""Exact rational helpers shared by the cost engine and the ILP builder."""

from decimal import Decimal
from fractions import Fraction
from numbers import Rational

MM_PER_KM = 10**6


def exact(value) -> Fraction:
    """Convert a user-facing number to a Fraction.

    Floats go through their shortest repr, so ``0.15`` becomes ``3/20``
    rather than the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, Decimal):
        return Fraction(value)
    return Fraction(repr(float(value)))


def km_from_mm(mm: int) -> Fraction:
    return Fraction(int(mm), MM_PER_KM)
