"""Relational linear-constraint domain with exact rational arithmetic.

A `Polyhedron` is a conjunction of canonical `LinearConstraint`s plus an
explicit bottom element; its concretization is the set of rational
variable assignments satisfying every constraint. Feasibility and
projection run Fourier-Motzkin elimination, using equalities as Gaussian
pivots and Imbert's ancestor bound plus syntactic dominance checks to
curb the growth of derived rows. Entailment reduces to exact
optimization: P entails e <= 0 iff the maximum of e over P is <= 0.

Infeasibility is detected eagerly, so every stored non-bottom polyhedron
is satisfiable. Redundant constraints may persist by design; the join
and widening operators work on the stored representation, and
`normalize` computes a minimal canonical form for printing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .lin import AffineExpr, LinearConstraint, Var, VarKind, eq, ge, initial, le, temp

__all__ = [
    "Polyhedron",
    "TOP",
    "BOTTOM",
    "poly",
    "is_feasible",
    "meet",
    "project",
    "assign_affine",
    "assign_interval",
    "weak_join",
    "widen",
    "entails",
    "max_expr",
    "poly_leq",
    "gamma_equal",
    "abstract_instance",
    "normalize",
    "format_poly",
]

# Exact redundancy pruning kicks in when an elimination step leaves more
# rows than this.
PRUNE_CAP = 64


class _Infeasible(Exception):
    pass


@dataclass(frozen=True)
class Polyhedron:
    constraints: tuple[LinearConstraint, ...] = ()
    bottom: bool = False

    def variables(self) -> tuple[Var, ...]:
        seen: set[Var] = set()
        for c in self.constraints:
            seen.update(c.variables())
        return tuple(sorted(seen))

    def satisfied_by(self, env: Mapping[Var, Fraction]) -> bool:
        return not self.bottom and all(c.satisfied_by(env) for c in self.constraints)

    def __str__(self) -> str:
        return format_poly(self)


TOP = Polyhedron()
BOTTOM = Polyhedron((), True)


# ---------------------------------------------------------------------------
# Row machinery: constraints paired with the set of input rows they were
# derived from, for Imbert's redundancy bound.

_Row = tuple[LinearConstraint, frozenset]


def _neg_terms(terms: tuple[tuple[Var, int], ...]) -> tuple[tuple[Var, int], ...]:
    return tuple((v, -c) for v, c in terms)


def _dedup(rows: Iterable[_Row]) -> list[_Row]:
    """Merge same-normal rows, collapse opposite inequality pairs into
    equalities, and reduce inequalities against equalities on identical
    terms. Raises _Infeasible on a direct contradiction."""
    eqs: dict[tuple, tuple[int, frozenset]] = {}
    les: dict[tuple, tuple[int, frozenset]] = {}
    for c, anc in rows:
        if c.is_trivial():
            continue
        if c.is_impossible():
            raise _Infeasible
        if c.equality:
            prev = eqs.get(c.terms)
            if prev is not None:
                if prev[0] != c.const:
                    raise _Infeasible
                if len(anc) < len(prev[1]):
                    eqs[c.terms] = (c.const, anc)
            else:
                eqs[c.terms] = (c.const, anc)
        else:
            prev = les.get(c.terms)
            # larger stored constant means a tighter bound for expr <= 0
            if prev is None or c.const > prev[0] or (
                c.const == prev[0] and len(anc) < len(prev[1])
            ):
                les[c.terms] = (c.const, anc)

    # x <= a together with x >= a is x = a; x >= b with b > a is empty.
    for terms in list(les):
        neg = _neg_terms(terms)
        if terms not in les or neg not in les:
            continue
        if neg < terms:
            continue
        c1, a1 = les[terms]
        c2, a2 = les[neg]
        if c1 + c2 > 0:
            raise _Infeasible
        if c1 + c2 == 0:
            merged = LinearConstraint.make(
                AffineExpr(
                    tuple((v, Fraction(k)) for v, k in terms), Fraction(c1)
                ),
                equality=True,
            )
            prev = eqs.get(merged.terms)
            if prev is not None and prev[0] != merged.const:
                raise _Infeasible
            if prev is None or len(a1 | a2) < len(prev[1]):
                eqs[merged.terms] = (merged.const, a1 | a2)
            del les[terms]
            del les[neg]

    out: list[_Row] = [
        (LinearConstraint(terms, const, True), anc)
        for terms, (const, anc) in eqs.items()
    ]
    for terms, (const, anc) in les.items():
        hit = eqs.get(terms)
        if hit is not None:
            if const <= hit[0]:
                continue
            raise _Infeasible
        hit = eqs.get(_neg_terms(terms))
        if hit is not None:
            if const <= -hit[0]:
                continue
            raise _Infeasible
        out.append((LinearConstraint(terms, const, False), anc))
    return out


def _combine(pos: _Row, neg: _Row, var: Var) -> _Row:
    """Eliminate `var` from an upper-bound and a lower-bound inequality."""
    cp, ap = pos
    cn, an = neg
    a = cp.expr.coeff(var)
    b = cn.expr.coeff(var)
    expr = cp.expr * (-b) + cn.expr * a
    return LinearConstraint.make(expr, equality=False), ap | an


def _solve_equality(c: LinearConstraint, var: Var) -> AffineExpr:
    a = c.expr.coeff(var)
    rest = c.expr - AffineExpr.of(var) * a
    return rest * (Fraction(-1) / a)


def _eliminate(rows: list[_Row], targets: set[Var], cap: int | None = None) -> list[_Row]:
    """Project away `targets` exactly. Raises _Infeasible iff the input
    system has no solution over the rationals."""
    rows = _dedup(rows)
    eliminated = 0

    # Gaussian phase: consume equalities that mention a target variable.
    while True:
        pivot = None
        for c, anc in rows:
            if not c.equality:
                continue
            tv = next((v for v, _ in c.terms if v in targets), None)
            if tv is not None:
                pivot = (c, anc, tv)
                break
        if pivot is None:
            break
        c, anc, var = pivot
        replacement = _solve_equality(c, var)
        eliminated += 1
        next_rows: list[_Row] = []
        for c2, anc2 in rows:
            if c2 is c:
                continue
            if c2.coeff(var) == 0:
                next_rows.append((c2, anc2))
            else:
                rewritten = LinearConstraint.make(
                    c2.expr.substitute(var, replacement), c2.equality
                )
                next_rows.append((rewritten, anc2 | anc))
        rows = _dedup(next_rows)

    # Fourier-Motzkin phase for the remaining inequalities.
    while True:
        occurrence: dict[Var, tuple[int, int]] = {}
        for c, _ in rows:
            for v, k in c.terms:
                if v in targets:
                    p, n = occurrence.get(v, (0, 0))
                    occurrence[v] = (p + 1, n) if k > 0 else (p, n + 1)
        if not occurrence:
            break
        var = min(occurrence, key=lambda v: (occurrence[v][0] * occurrence[v][1], v))
        pos = [r for r in rows if r[0].coeff(var) > 0]
        neg = [r for r in rows if r[0].coeff(var) < 0]
        rest = [r for r in rows if r[0].coeff(var) == 0]
        eliminated += 1
        produced: list[_Row] = []
        for p in pos:
            for n in neg:
                row = _combine(p, n, var)
                # Imbert: any irredundant derived row combines at most
                # eliminated+1 input rows.
                if len(row[1]) <= eliminated + 1:
                    produced.append(row)
        rows = _dedup(rest + produced)
        if cap is not None and len(rows) > cap:
            rows = _prune_exact(rows)
    return rows


def _prune_exact(rows: list[_Row]) -> list[_Row]:
    """Drop rows entailed by the remaining ones; exact but costly."""
    order = sorted(range(len(rows)), key=lambda i: (-len(rows[i][1]), rows[i][0].sort_key()))
    keep = list(rows)
    for i in order:
        row = rows[i]
        if row not in keep:
            continue
        others = [r for r in keep if r is not row]
        if not others:
            break
        if _entails_rows(others, row[0]):
            keep = others
    return keep


def _fresh_temp(in_use: Iterable[Var]) -> Var:
    taken = {v.index for v in in_use if v.kind is VarKind.TEMP}
    k = 0
    while k in taken:
        k += 1
    return temp(k)


def _max_rows(rows: list[_Row], expr: AffineExpr) -> Fraction | None:
    """Exact maximum of `expr` subject to `rows`; None means unbounded.
    Raises _Infeasible if the system is empty."""
    in_use: set[Var] = set(expr.variables())
    for c, _ in rows:
        in_use.update(c.variables())
    t = _fresh_temp(in_use)
    defining = LinearConstraint.make(AffineExpr.of(t) - expr, equality=True)
    targets = set(in_use)
    residual = _eliminate(rows + [(defining, frozenset())], targets)
    best: Fraction | None = None
    for c, _ in residual:
        a = c.expr.coeff(t)
        if a == 0:
            continue
        bound = Fraction(-c.const, 1) / a
        if c.equality:
            return bound
        if a > 0 and (best is None or bound < best):
            best = bound
    return best


def _entails_rows(rows: list[_Row], c: LinearConstraint) -> bool:
    try:
        if c.equality:
            hi = _max_rows(rows, c.expr)
            if hi is None or hi > 0:
                return False
            lo = _max_rows(rows, -c.expr)
            return lo is not None and lo <= 0
        hi = _max_rows(rows, c.expr)
        return hi is not None and hi <= 0
    except _Infeasible:
        return True


# ---------------------------------------------------------------------------
# Public operations

def poly(constraints: Iterable[LinearConstraint], check: bool = True) -> Polyhedron:
    """Build a polyhedron; returns BOTTOM when the conjunction is
    unsatisfiable. `check=False` skips the feasibility test for callers
    that can guarantee it."""
    try:
        rows = _dedup((c, frozenset((i,))) for i, c in enumerate(constraints))
        if check:
            targets = {v for c, _ in rows for v in c.variables()}
            _eliminate(list(rows), targets, cap=PRUNE_CAP)
    except _Infeasible:
        return BOTTOM
    return Polyhedron(tuple(sorted((c for c, _ in rows), key=LinearConstraint.sort_key)))


def is_feasible(p: Polyhedron) -> bool:
    return not p.bottom


def meet(p: Polyhedron, extra: "Polyhedron | Iterable[LinearConstraint]") -> Polyhedron:
    if isinstance(extra, Polyhedron):
        if extra.bottom:
            return BOTTOM
        extra = extra.constraints
    if p.bottom:
        return BOTTOM
    return poly(tuple(p.constraints) + tuple(extra))


def project(p: Polyhedron, targets: Iterable[Var]) -> Polyhedron:
    """Existentially quantify `targets` away; exact."""
    if p.bottom:
        return BOTTOM
    try:
        rows = _eliminate(
            [(c, frozenset((i,))) for i, c in enumerate(p.constraints)],
            set(targets),
            cap=PRUNE_CAP,
        )
    except _Infeasible:  # cannot happen for stored feasible polyhedra
        return BOTTOM
    return poly((c for c, _ in rows), check=False)


def assign_affine(p: Polyhedron, var: Var, rhs: AffineExpr) -> Polyhedron:
    """Strongest postcondition of `var := rhs`."""
    if p.bottom:
        return BOTTOM
    a = rhs.coeff(var)
    if a != 0:
        # invertible update: old var value is (var - rest) / a
        rest = rhs - AffineExpr.of(var) * a
        replacement = (AffineExpr.of(var) - rest) / a
        rewritten = [
            LinearConstraint.make(c.expr.substitute(var, replacement), c.equality)
            for c in p.constraints
        ]
        return poly(rewritten, check=False)
    dropped = project(p, (var,))
    return poly(
        tuple(dropped.constraints) + (eq(AffineExpr.of(var), rhs),), check=False
    )


def assign_interval(p: Polyhedron, var: Var, low: AffineExpr, high: AffineExpr) -> Polyhedron:
    """Strongest postcondition of `var := nondeterministic value in
    [low, high]`, both bounds evaluated on the pre-state."""
    if p.bottom:
        return BOTTOM
    in_use = set(p.variables()) | set(low.variables()) | set(high.variables())
    fresh = _fresh_temp(in_use)
    bounds = [ge(AffineExpr.of(fresh), low), le(AffineExpr.of(fresh), high)]
    try:
        rows = _eliminate(
            [(c, frozenset((i,))) for i, c in enumerate(tuple(p.constraints) + tuple(bounds))],
            {var},
            cap=PRUNE_CAP,
        )
    except _Infeasible:
        return BOTTOM
    renamed = [
        LinearConstraint.make(c.expr.substitute(fresh, AffineExpr.of(var)), c.equality)
        for c, _ in rows
    ]
    # empty when low > high everywhere on p
    return poly(renamed)


def max_expr(p: Polyhedron, expr: AffineExpr) -> Fraction | None:
    """Exact maximum of `expr` over p, None when unbounded above."""
    if p.bottom:
        raise ValueError("max_expr over bottom")
    rows = [(c, frozenset((i,))) for i, c in enumerate(p.constraints)]
    return _max_rows(rows, expr)


def entails(p: Polyhedron, c: LinearConstraint) -> bool:
    """True iff every point of p satisfies c. Bottom entails anything."""
    if p.bottom:
        return True
    if c.is_trivial():
        return True
    if c.is_impossible():
        return False
    rows = [(k, frozenset((i,))) for i, k in enumerate(p.constraints)]
    return _entails_rows(rows, c)


def _split(p: Polyhedron) -> list[LinearConstraint]:
    out: list[LinearConstraint] = []
    for c in p.constraints:
        if c.equality:
            out.append(LinearConstraint.make(c.expr, equality=False))
            out.append(LinearConstraint.make(-c.expr, equality=False))
        else:
            out.append(c)
    return out


def weak_join(p1: Polyhedron, p2: Polyhedron) -> Polyhedron:
    """Mutual-entailment upper bound: keep the constraints of each
    operand that the other entails. Bottom is the identity."""
    if p1.bottom:
        return p2
    if p2.bottom:
        return p1
    kept = [c for c in _split(p1) if entails(p2, c)]
    kept.extend(c for c in _split(p2) if entails(p1, c))
    return poly(kept, check=False)


def widen(
    old: Polyhedron,
    new: Polyhedron,
    up_to: Sequence[LinearConstraint] = (),
) -> Polyhedron:
    """Keep exactly the constraints of `old` that `new` entails; the
    stored constraint set never grows, which forces stabilization.

    `up_to` are rescue thresholds: any of them entailed by both sides is
    kept too. The stored form holds only the tightest bound in each
    direction, so a stable weak fact (B >= 0) can be shadowed by an
    unstable tighter one (B >= 5) and lost by plain widening; thresholds
    put it back. Each threshold can be dropped at most once along an
    ascending chain, so termination degrades by at most len(up_to)."""
    if old.bottom:
        return new
    if new.bottom:
        return old
    kept = [c for c in _split(old) if entails(new, c)]
    kept.extend(c for c in up_to if entails(new, c) and entails(old, c))
    return poly(kept, check=False)


def poly_leq(p: Polyhedron, q: Polyhedron) -> bool:
    """gamma(p) included in gamma(q)."""
    if p.bottom:
        return True
    return all(entails(p, c) for c in q.constraints)


def gamma_equal(p: Polyhedron, q: Polyhedron) -> bool:
    return poly_leq(p, q) and poly_leq(q, p)


def abstract_instance(x: Sequence[Fraction]) -> Polyhedron:
    """Singleton abstraction {x_i = x[i] for all i} over initial-feature
    variables."""
    return poly(
        (eq(AffineExpr.of(initial(i)), AffineExpr.constant(v)) for i, v in enumerate(x)),
        check=False,
    )


# ---------------------------------------------------------------------------
# Canonical minimal form, for debug output and print determinism.

def normalize(p: Polyhedron) -> Polyhedron:
    """Minimal canonical representation of the same set: implicit
    equalities recovered, equalities in reduced echelon form,
    inequalities reduced modulo the equalities and redundancy-free."""
    if p.bottom:
        return BOTTOM
    les = []
    seen: set[LinearConstraint] = set()
    for c in _split(p):
        if c not in seen:
            seen.add(c)
            les.append(c)
    eqs: list[LinearConstraint] = []
    ineqs: list[LinearConstraint] = []
    for c in les:
        reverse = LinearConstraint.make(-c.expr, equality=False)
        if reverse in seen or entails(p, reverse):
            merged = LinearConstraint.make(c.expr, equality=True)
            if merged not in eqs:
                eqs.append(merged)
        else:
            ineqs.append(c)

    # reduced echelon over the variable order
    echelon: list[LinearConstraint] = []
    pending = sorted(eqs, key=LinearConstraint.sort_key)
    for var in sorted({v for c in eqs for v in c.variables()}):
        source = next((c for c in pending if c.coeff(var) != 0), None)
        if source is None:
            continue
        pending = [c for c in pending if c is not source]
        replacement = _solve_equality(source, var)
        pending = [
            LinearConstraint.make(c.expr.substitute(var, replacement), True)
            for c in pending
        ]
        pending = [c for c in pending if not c.is_trivial()]
        echelon = [
            LinearConstraint.make(c.expr.substitute(var, replacement), True)
            if c.coeff(var) != 0
            else c
            for c in echelon
        ]
        echelon.append(LinearConstraint.make(AffineExpr.of(var) - replacement, True))
        ineqs = [
            LinearConstraint.make(c.expr.substitute(var, replacement), False)
            if c.coeff(var) != 0
            else c
            for c in ineqs
        ]

    reduced: list[LinearConstraint] = []
    for c in sorted(set(ineqs), key=LinearConstraint.sort_key):
        if c.is_trivial():
            continue
        known = {k.terms: k.const for k in reduced}
        if c.terms in known and known[c.terms] >= c.const:
            continue
        reduced.append(c)
    survivors = list(reduced)
    for c in list(reduced):
        others = [k for k in survivors if k is not c]
        base = poly(tuple(echelon) + tuple(others), check=False)
        if entails(base, c):
            survivors = others
    final = sorted(echelon + survivors, key=LinearConstraint.sort_key)
    return Polyhedron(tuple(final))


def format_poly(p: Polyhedron) -> str:
    """Stable one-constraint-per-line text form."""
    if p.bottom:
        return "false"
    canon = normalize(p)
    if not canon.constraints:
        return "true"
    return "\n".join(str(c) for c in canon.constraints)
