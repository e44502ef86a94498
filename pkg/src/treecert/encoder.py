"""Encoding of trees and attackers into a small guarded-command IR.

The attacker becomes: an init block copying x into xp, zeroing one
counter per rule and setting B to the budget, followed by a loop whose
body non-deterministically picks an applicable rule; the loop itself
may stop at any iteration, so no explicit "done" flag is needed. Each
rule branch assumes its precondition and remaining budget, shifts the
attacked feature by an interval assignment, pays the cost and bumps the
rule counter.

The tree becomes a nest of two-way conditionals on attacked features;
`Cond` guards read "xp[feature] <= threshold".

Besides the statements, `encode_attacker` emits seed constraints: facts
that hold with equality right after init (counters at zero, budget
untouched, xp equal to x) and are preserved by every rule branch. The
analyzer may add whichever of them are entailed by its entry state to
strengthen the loop invariant it searches for; they carry no semantic
content of their own.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .lin import (
    AffineExpr,
    BUDGET,
    LinearConstraint,
    Var,
    attacked,
    counter,
    eq,
    ge,
    initial,
    le,
)
from .model import Attacker, DecisionTree, Label, Leaf, Split

__all__ = [
    "Assume",
    "AssignAffine",
    "AssignInterval",
    "Choice",
    "Loop",
    "Stmt",
    "ReturnLabel",
    "Cond",
    "TreeProgram",
    "AttackerProgram",
    "encode_tree",
    "encode_attacker",
    "format_attacker_program",
    "format_tree_program",
]


@dataclass(frozen=True)
class Assume:
    constraints: tuple[LinearConstraint, ...]


@dataclass(frozen=True)
class AssignAffine:
    target: Var
    rhs: AffineExpr


@dataclass(frozen=True)
class AssignInterval:
    target: Var
    low: AffineExpr
    high: AffineExpr


@dataclass(frozen=True)
class Choice:
    branches: tuple[tuple["Stmt", ...], ...]


@dataclass(frozen=True)
class Loop:
    body: tuple["Stmt", ...]


Stmt = Union[Assume, AssignAffine, AssignInterval, Choice, Loop]


@dataclass(frozen=True)
class ReturnLabel:
    label: Label


@dataclass(frozen=True)
class Cond:
    """Two-way branch on `xp[feature] <= threshold`."""

    feature: int
    threshold: Fraction
    then_branch: "TreeProgram"
    else_branch: "TreeProgram"


TreeProgram = Union[ReturnLabel, Cond]


@dataclass(frozen=True)
class AttackerProgram:
    dimension: int
    n_rules: int
    init: tuple[Stmt, ...]
    loop: Loop
    seeds: tuple[LinearConstraint, ...]


def encode_tree(tree: DecisionTree) -> TreeProgram:
    """Structure-preserving translation: Split -> Cond, Leaf -> ReturnLabel."""

    def walk(node) -> TreeProgram:
        if isinstance(node, Leaf):
            return ReturnLabel(node.label)
        assert isinstance(node, Split)
        return Cond(node.feature, node.threshold, walk(node.left), walk(node.right))

    return walk(tree.root)


def encode_attacker(attacker: Attacker, dimension: int) -> AttackerProgram:
    init: list[Stmt] = []
    for i in range(dimension):
        init.append(AssignAffine(attacked(i), AffineExpr.of(initial(i))))
    for j in range(len(attacker.rules)):
        init.append(AssignAffine(counter(j), AffineExpr.constant(0)))
    init.append(AssignAffine(BUDGET, AffineExpr.constant(attacker.budget)))

    branches: list[tuple[Stmt, ...]] = []
    for j, rule in enumerate(attacker.rules):
        xp = AffineExpr.of(attacked(rule.feature))
        guards: list[LinearConstraint] = []
        if rule.pre_lo is not None:
            guards.append(ge(xp, rule.pre_lo))
        if rule.pre_hi is not None:
            guards.append(le(xp, rule.pre_hi))
        guards.append(ge(AffineExpr.of(BUDGET), rule.cost))
        branches.append(
            (
                Assume(tuple(guards)),
                AssignInterval(attacked(rule.feature), xp + rule.delta_lo, xp + rule.delta_hi),
                AssignAffine(BUDGET, AffineExpr.of(BUDGET) - rule.cost),
                AssignAffine(counter(j), AffineExpr.of(counter(j)) + 1),
            )
        )
    loop = Loop((Choice(tuple(branches)),))

    # Facts that hold after init and are re-established by every branch:
    # per-feature drift bounded by counter-weighted delta sums, budget
    # linked to counters, counters and budget non-negative.
    seeds: list[LinearConstraint] = []
    spent = AffineExpr.constant(0)
    for j, rule in enumerate(attacker.rules):
        spent = spent + AffineExpr.of(counter(j)) * rule.cost
    seeds.append(eq(AffineExpr.of(BUDGET), AffineExpr.constant(attacker.budget) - spent))
    seeds.append(ge(AffineExpr.of(BUDGET), 0))
    for j in range(len(attacker.rules)):
        seeds.append(ge(AffineExpr.of(counter(j)), 0))
    for i in sorted({rule.feature for rule in attacker.rules}):
        drift_hi = AffineExpr.constant(0)
        drift_lo = AffineExpr.constant(0)
        for j, rule in enumerate(attacker.rules):
            if rule.feature == i:
                drift_hi = drift_hi + AffineExpr.of(counter(j)) * rule.delta_hi
                drift_lo = drift_lo + AffineExpr.of(counter(j)) * rule.delta_lo
        xp = AffineExpr.of(attacked(i))
        x = AffineExpr.of(initial(i))
        seeds.append(le(xp - x, drift_hi))
        seeds.append(ge(xp - x, drift_lo))

    return AttackerProgram(
        dimension=dimension,
        n_rules=len(attacker.rules),
        init=tuple(init),
        loop=loop,
        seeds=tuple(seeds),
    )


# ---------------------------------------------------------------------------
# Stable textual form, one statement per line.

def _format_stmt(stmt: Stmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(stmt, Assume):
        for c in stmt.constraints:
            out.append(f"{pad}assume {c}")
    elif isinstance(stmt, AssignAffine):
        out.append(f"{pad}{stmt.target} := {stmt.rhs}")
    elif isinstance(stmt, AssignInterval):
        out.append(f"{pad}{stmt.target} :in [{stmt.low}, {stmt.high}]")
    elif isinstance(stmt, Choice):
        for i, branch in enumerate(stmt.branches):
            out.append(f"{pad}branch {i}:")
            for inner in branch:
                _format_stmt(inner, indent + 1, out)
        if not stmt.branches:
            out.append(f"{pad}branch (none)")
    elif isinstance(stmt, Loop):
        out.append(f"{pad}loop:")
        for inner in stmt.body:
            _format_stmt(inner, indent + 1, out)


def format_attacker_program(prog: AttackerProgram) -> str:
    out: list[str] = ["init:"]
    for stmt in prog.init:
        _format_stmt(stmt, 1, out)
    _format_stmt(prog.loop, 0, out)
    return "\n".join(out)


def format_tree_program(prog: TreeProgram) -> str:
    out: list[str] = []

    def walk(node: TreeProgram, indent: int) -> None:
        pad = "  " * indent
        if isinstance(node, ReturnLabel):
            out.append(f"{pad}return {node.label.name}")
            return
        out.append(f"{pad}if xp{node.feature} <= {node.threshold}:")
        walk(node.then_branch, indent + 1)
        out.append(f"{pad}else:")
        walk(node.else_branch, indent + 1)

    walk(prog, 0)
    return "\n".join(out)
