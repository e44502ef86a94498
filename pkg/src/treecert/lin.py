"""Affine expressions and linear constraints over analysis variables.

The verifier reasons about four families of variables: initial feature
values x_i, attacked feature values xp_i, one application counter r_j
per rewriting rule, and the remaining budget B. Temporaries t_k exist
only inside domain operations.

Constraints are canonicalized on construction: coefficients are scaled
to integers with overall gcd 1 and, for equalities, a positive leading
coefficient, so that the same fact always has the same representation
and hashes equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping

__all__ = ["VarKind", "Var", "AffineExpr", "LinearConstraint", "le", "ge", "eq"]


class VarKind(IntEnum):
    INITIAL = 0
    ATTACKED = 1
    COUNTER = 2
    BUDGET = 3
    TEMP = 4


@dataclass(frozen=True, order=True)
class Var:
    kind: VarKind
    index: int = 0

    @property
    def name(self) -> str:
        prefix = {
            VarKind.INITIAL: "x",
            VarKind.ATTACKED: "xp",
            VarKind.COUNTER: "r",
            VarKind.TEMP: "t",
        }
        if self.kind is VarKind.BUDGET:
            return "B"
        return f"{prefix[self.kind]}{self.index}"

    def __str__(self) -> str:
        return self.name


def initial(i: int) -> Var:
    return Var(VarKind.INITIAL, i)


def attacked(i: int) -> Var:
    return Var(VarKind.ATTACKED, i)


def counter(j: int) -> Var:
    return Var(VarKind.COUNTER, j)


BUDGET = Var(VarKind.BUDGET, 0)


def temp(k: int) -> Var:
    return Var(VarKind.TEMP, k)


Scalar = Fraction | int


@dataclass(frozen=True)
class AffineExpr:
    """Sum of coefficient*variable terms plus a constant, all exact."""

    terms: tuple[tuple[Var, Fraction], ...]
    const: Fraction

    @staticmethod
    def make(coeffs: Mapping[Var, Scalar] | Iterable[tuple[Var, Scalar]],
             const: Scalar = 0) -> "AffineExpr":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[Var, Fraction] = {}
        for var, c in items:
            acc[var] = acc.get(var, Fraction(0)) + Fraction(c)
        terms = tuple(sorted(((v, c) for v, c in acc.items() if c != 0)))
        return AffineExpr(terms, Fraction(const))

    @staticmethod
    def of(var: Var) -> "AffineExpr":
        return AffineExpr(((var, Fraction(1)),), Fraction(0))

    @staticmethod
    def constant(c: Scalar) -> "AffineExpr":
        return AffineExpr((), Fraction(c))

    def coeff(self, var: Var) -> Fraction:
        for v, c in self.terms:
            if v == var:
                return c
        return Fraction(0)

    def variables(self) -> tuple[Var, ...]:
        return tuple(v for v, _ in self.terms)

    def evaluate(self, env: Mapping[Var, Fraction]) -> Fraction:
        return sum((c * env[v] for v, c in self.terms), self.const)

    def substitute(self, var: Var, replacement: "AffineExpr") -> "AffineExpr":
        c = self.coeff(var)
        if c == 0:
            return self
        rest = [(v, k) for v, k in self.terms if v != var]
        rest.extend((v, c * k) for v, k in replacement.terms)
        return AffineExpr.make(rest, self.const + c * replacement.const)

    def __add__(self, other: "AffineExpr | Scalar") -> "AffineExpr":
        if isinstance(other, (int, Fraction)):
            return AffineExpr(self.terms, self.const + other)
        return AffineExpr.make(
            list(self.terms) + list(other.terms), self.const + other.const
        )

    __radd__ = __add__

    def __neg__(self) -> "AffineExpr":
        return AffineExpr(tuple((v, -c) for v, c in self.terms), -self.const)

    def __sub__(self, other: "AffineExpr | Scalar") -> "AffineExpr":
        if isinstance(other, (int, Fraction)):
            return AffineExpr(self.terms, self.const - other)
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "AffineExpr":
        return (-self) + other

    def __mul__(self, scalar: Scalar) -> "AffineExpr":
        k = Fraction(scalar)
        if k == 0:
            return AffineExpr((), Fraction(0))
        return AffineExpr(tuple((v, c * k) for v, c in self.terms), self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Scalar) -> "AffineExpr":
        return self * (Fraction(1) / Fraction(scalar))

    def __str__(self) -> str:
        if not self.terms:
            return str(self.const)
        parts: list[str] = []
        for v, c in self.terms:
            if not parts:
                if c == 1:
                    parts.append(f"{v}")
                elif c == -1:
                    parts.append(f"-{v}")
                else:
                    parts.append(f"{c}*{v}")
            else:
                sign = "+" if c > 0 else "-"
                mag = abs(c)
                parts.append(f"{sign} {v}" if mag == 1 else f"{sign} {mag}*{v}")
        if self.const != 0:
            sign = "+" if self.const > 0 else "-"
            parts.append(f"{sign} {abs(self.const)}")
        return " ".join(parts)


@dataclass(frozen=True)
class LinearConstraint:
    """Canonical `expr <= 0` (equality=False) or `expr = 0` (equality=True).

    Stored coefficients and constant are integers with gcd 1; an
    equality's first coefficient in variable order is positive.
    """

    terms: tuple[tuple[Var, int], ...]
    const: int
    equality: bool

    @staticmethod
    def make(expr: AffineExpr, equality: bool = False) -> "LinearConstraint":
        values = [c for _, c in expr.terms] + [expr.const]
        scale = lcm(*(f.denominator for f in values)) if values else 1
        ints = [int(f * scale) for f in values]
        g = gcd(*ints) if any(ints) else 1
        if g == 0:
            g = 1
        coeffs = [c // g for c in ints[:-1]]
        const = ints[-1] // g
        if equality:
            leading = next((c for c in coeffs if c != 0), const)
            if leading < 0:
                coeffs = [-c for c in coeffs]
                const = -const
        terms = tuple((v, c) for (v, _), c in zip(expr.terms, coeffs) if c != 0)
        return LinearConstraint(terms, const, equality)

    @property
    def expr(self) -> AffineExpr:
        return AffineExpr(
            tuple((v, Fraction(c)) for v, c in self.terms), Fraction(self.const)
        )

    def coeff(self, var: Var) -> int:
        for v, c in self.terms:
            if v == var:
                return c
        return 0

    def variables(self) -> tuple[Var, ...]:
        return tuple(v for v, _ in self.terms)

    def is_trivial(self) -> bool:
        """Constant constraint that always holds."""
        if self.terms:
            return False
        return self.const == 0 if self.equality else self.const <= 0

    def is_impossible(self) -> bool:
        """Constant constraint that never holds."""
        if self.terms:
            return False
        return self.const != 0 if self.equality else self.const > 0

    def satisfied_by(self, env: Mapping[Var, Fraction]) -> bool:
        value = self.expr.evaluate(env)
        return value == 0 if self.equality else value <= 0

    def sort_key(self) -> tuple:
        return (self.equality, self.terms, self.const)

    def __str__(self) -> str:
        # Display with the constant moved right and, for pure upper/lower
        # bounds, a sign that keeps the variable positive.
        rel = "=" if self.equality else "<="
        lhs = AffineExpr(tuple((v, Fraction(c)) for v, c in self.terms), Fraction(0))
        rhs = Fraction(-self.const)
        if not self.equality and all(c < 0 for _, c in lhs.terms) and lhs.terms:
            return f"{-lhs} >= {-rhs}"
        return f"{lhs} {rel} {rhs}"


def le(lhs: AffineExpr | Scalar, rhs: AffineExpr | Scalar) -> LinearConstraint:
    """lhs <= rhs."""
    lhs = lhs if isinstance(lhs, AffineExpr) else AffineExpr.constant(lhs)
    return LinearConstraint.make(lhs - rhs, equality=False)


def ge(lhs: AffineExpr | Scalar, rhs: AffineExpr | Scalar) -> LinearConstraint:
    """lhs >= rhs."""
    rhs = rhs if isinstance(rhs, AffineExpr) else AffineExpr.constant(rhs)
    return LinearConstraint.make(rhs - lhs, equality=False)


def eq(lhs: AffineExpr | Scalar, rhs: AffineExpr | Scalar) -> LinearConstraint:
    """lhs = rhs."""
    lhs = lhs if isinstance(lhs, AffineExpr) else AffineExpr.constant(lhs)
    return LinearConstraint.make(lhs - rhs, equality=True)
