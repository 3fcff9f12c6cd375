"""Canonical rational strings: the wire form of every value, tolerance and eps."""
from fractions import Fraction
from typing import Union

from app.errors import SchemaError

Rat = Fraction
Number = Union[int, Fraction]


def parse_rat(text: str) -> Rat:
    """Parse a canonical rational string: "3", "-1/2". "2/4", "+1" and "1/1" are rejected."""
    if not isinstance(text, str):
        raise SchemaError(f"expected a rational string, got {type(text).__name__}")
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise SchemaError(f"not a rational: {text!r}")
    if str(value) != text:
        raise SchemaError(f"non-canonical rational {text!r} (expected {str(value)!r})")
    return value


def format_rat(value: Number) -> str:
    return str(Fraction(value))
