"""Exact parsing and formatting of rational numbers.

All quantities in model files are decimal strings ("0.1", "-2.5e-3");
they are converted to `fractions.Fraction` without ever touching binary
floating point, so 0.1 really is 1/10.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "parse_rational",
    "parse_endpoint",
    "format_rational",
    "format_decimal",
]


def parse_rational(value: object, where: str = "value") -> Fraction:
    """Parse a decimal string (or int) into an exact Fraction.

    Scientific notation and plain fractions ("3/4") are accepted.
    `where` names the location reported on failure.
    """
    if isinstance(value, bool):
        raise ValueError(f"{where}: expected a number, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{where}: not a decimal number: {value!r}") from exc
    raise ValueError(f"{where}: expected a decimal string, got {type(value).__name__}")


def parse_endpoint(value: object, where: str = "value") -> Fraction | None:
    """Parse an interval endpoint; "-inf" and "inf" map to None (unbounded)."""
    if isinstance(value, str) and value.strip().lstrip("+-") == "inf":
        return None
    return parse_rational(value, where)


def format_rational(q: Fraction) -> str:
    """Canonical exact text: "5", "-3/4"."""
    return str(q)


def format_decimal(q: Fraction) -> str:
    """Shortest exact decimal string if one exists, else "p/q".

    A fraction has a finite decimal expansion iff its reduced
    denominator is 2^a * 5^b.
    """
    den = q.denominator
    twos = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    fives = 0
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return str(q)
    digits = max(twos, fives)
    if digits == 0:
        return str(q.numerator)
    scaled = q.numerator * 10**digits // q.denominator
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled)).rjust(digits + 1, "0")
    whole, frac = text[:-digits], text[-digits:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"
