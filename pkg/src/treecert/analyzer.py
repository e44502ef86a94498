"""Abstract interpretation of attacker programs and tree reachability.

The attacker summary is one relational invariant over initial features,
attacked features, rule counters and budget, computed by Kleene
iteration (join for the first `widening_delay` rounds, widening after
that) and then verified inductive: the entry state must be contained in
it and so must the abstract effect of one more loop iteration. A failed
verification aborts the analysis rather than report anything.

Because the summary leaves the initial features unconstrained, it is
computed once per (tree, attacker) pair and reused for every instance:
classifying an instance meets the summary with the point abstraction of
x and collects the leaf labels whose path constraints stay satisfiable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .domain import (
    BOTTOM,
    TOP,
    Polyhedron,
    abstract_instance,
    assign_affine,
    assign_interval,
    entails,
    meet,
    poly,
    poly_leq,
    project,
    weak_join,
    widen,
)
from .encoder import (
    AssignAffine,
    AssignInterval,
    Assume,
    AttackerProgram,
    Choice,
    Cond,
    Loop,
    ReturnLabel,
    Stmt,
    TreeProgram,
    encode_attacker,
    encode_tree,
)
from .lin import AffineExpr, LinearConstraint, VarKind, attacked, ge, le
from .model import (
    Attacker,
    DecisionTree,
    Instance,
    Label,
    LabeledDataset,
    ValidationError,
    predict,
    validate_attacker_for,
)

__all__ = [
    "SoundnessError",
    "AttackerSummary",
    "Verdict",
    "RowResult",
    "DatasetAnalysis",
    "attacker_summary",
    "reachable_labels",
    "classify",
    "analyze_dataset",
]

DEFAULT_WIDENING_DELAY = 5

# Hard ceiling on fixpoint rounds; widening drops at least one stored
# constraint per round, so hitting this means something is broken.
_MAX_ITERATIONS = 10_000


class SoundnessError(Exception):
    """The analyzer caught itself producing an unsound result (exit 3)."""


class Verdict(str, Enum):
    CERTIFIED_ROBUST = "CertifiedRobust"
    POSSIBLY_VULNERABLE = "PossiblyVulnerable"
    MISCLASSIFIED_CLEAN = "MisclassifiedClean"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AttackerSummary:
    invariant: Polyhedron
    converged_without_widening: bool
    iterations: int


@dataclass(frozen=True)
class RowResult:
    predicted: Label
    verdict: Verdict
    reachable: frozenset[Label]


@dataclass(frozen=True)
class DatasetAnalysis:
    summary: AttackerSummary
    rows: tuple[RowResult, ...]


def _exec_stmt(state: Polyhedron, stmt: Stmt, delay: int) -> Polyhedron:
    if state.bottom:
        return BOTTOM
    if isinstance(stmt, Assume):
        return meet(state, stmt.constraints)
    if isinstance(stmt, AssignAffine):
        return assign_affine(state, stmt.target, stmt.rhs)
    if isinstance(stmt, AssignInterval):
        if not entails(state, le(stmt.low, stmt.high)):
            raise SoundnessError(
                f"interval assignment to {stmt.target} with low > high reachable"
            )
        return assign_interval(state, stmt.target, stmt.low, stmt.high)
    if isinstance(stmt, Choice):
        result = BOTTOM
        for branch in stmt.branches:
            result = weak_join(result, _exec_seq(state, branch, delay))
        return result
    if isinstance(stmt, Loop):
        invariant, _, _ = _loop_fixpoint(state, stmt, delay)
        return invariant
    raise TypeError(f"unknown statement {stmt!r}")


def _exec_seq(state: Polyhedron, stmts: Sequence[Stmt], delay: int) -> Polyhedron:
    for stmt in stmts:
        state = _exec_stmt(state, stmt, delay)
    return state


def _loop_fixpoint(
    entry: Polyhedron,
    loop: Loop,
    delay: int,
    thresholds: Sequence[LinearConstraint] = (),
) -> tuple[Polyhedron, bool, int]:
    """Post-fixpoint of the loop body from `entry`; the loop may exit at
    any head, so the invariant is also the exit state.

    `thresholds` are rescue constraints for the widening, keeping facts
    that are still entailed but stored only in a tighter, unstable form
    (widening up to). Without them the invariant degrades on budgets
    large enough to outlast the delay."""
    state = entry
    applied_widening = False
    for iteration in itertools.count(1):
        body = _exec_seq(state, loop.body, delay)
        grown = weak_join(state, body)
        if poly_leq(grown, state):
            return state, applied_widening, iteration
        if iteration <= delay:
            state = grown
        else:
            state = widen(state, grown, thresholds)
            applied_widening = True
        if iteration > _MAX_ITERATIONS:
            raise SoundnessError("attacker fixpoint failed to stabilize")
    raise AssertionError("unreachable")


def attacker_summary(
    prog: AttackerProgram,
    widening_delay: int = DEFAULT_WIDENING_DELAY,
    initial: Polyhedron | None = None,
) -> AttackerSummary:
    """Relational loop invariant of the attacker program.

    `initial` defaults to top, leaving initial features unconstrained so
    the summary can be reused for any instance; pass an instance
    abstraction for the per-instance mode.
    """
    entry = TOP if initial is None else initial
    entry = _exec_seq(entry, prog.init, widening_delay)

    if not entry.bottom:
        # Seeds entailed by the entry state describe the same set; adding
        # them only enriches the stored representation, which the
        # entailment-based join can then preserve across iterations.
        kept = [c for c in prog.seeds if entails(entry, c)]
        entry = poly(tuple(entry.constraints) + tuple(kept), check=False)

    invariant, applied_widening, iterations = _loop_fixpoint(
        entry, prog.loop, widening_delay, thresholds=prog.seeds
    )

    if not poly_leq(entry, invariant):
        raise SoundnessError("attacker summary does not cover the entry state")
    body = _exec_seq(invariant, prog.loop.body, widening_delay)
    if not poly_leq(body, invariant):
        raise SoundnessError("attacker summary is not inductive")

    return AttackerSummary(
        invariant=invariant,
        converged_without_widening=not applied_widening,
        iterations=iterations,
    )


def reachable_labels(
    summary: AttackerSummary | Polyhedron,
    program: TreeProgram,
    x: Instance,
) -> frozenset[Label]:
    """Labels of every leaf whose path constraints are satisfiable under
    the attacker summary for the given instance."""
    invariant = summary.invariant if isinstance(summary, AttackerSummary) else summary
    state = meet(invariant, abstract_instance(x))
    # Tree guards only mention attacked features; projecting the rest out
    # preserves satisfiability of every path conjunction.
    others = [v for v in state.variables() if v.kind is not VarKind.ATTACKED]
    state = project(state, others)

    labels: set[Label] = set()

    def walk(node: TreeProgram, region: Polyhedron) -> None:
        if region.bottom:
            return
        if isinstance(node, ReturnLabel):
            labels.add(node.label)
            return
        guard = AffineExpr.of(attacked(node.feature))
        walk(node.then_branch, meet(region, (le(guard, node.threshold),)))
        # the negated guard is relaxed to its closure, which is sound
        walk(node.else_branch, meet(region, (ge(guard, node.threshold),)))

    walk(program, state)
    if not labels:
        raise SoundnessError("no reachable leaf for instance")
    return frozenset(labels)


def classify(
    tree: DecisionTree,
    summary: AttackerSummary,
    program: TreeProgram,
    x: Instance,
    y: Label,
) -> RowResult:
    predicted = predict(tree, x)
    reachable = reachable_labels(summary, program, x)
    if predicted not in reachable:
        raise SoundnessError("clean prediction missing from reachable labels")
    if predicted != y:
        verdict = Verdict.MISCLASSIFIED_CLEAN
    elif reachable == {y}:
        verdict = Verdict.CERTIFIED_ROBUST
    else:
        verdict = Verdict.POSSIBLY_VULNERABLE
    return RowResult(predicted=predicted, verdict=verdict, reachable=reachable)


def analyze_dataset(
    tree: DecisionTree,
    attacker: Attacker,
    dataset: LabeledDataset,
    widening_delay: int = DEFAULT_WIDENING_DELAY,
    per_instance: bool = False,
) -> DatasetAnalysis:
    """Verdicts for every row, in input order.

    The attacker summary is computed once and shared; `per_instance`
    recomputes the fixpoint from each instance's abstraction instead,
    trading time for precision.
    """
    validate_attacker_for(attacker, tree.dimension)
    known = set(tree.labels)
    for i, (x, y) in enumerate(dataset.rows):
        if len(x) != tree.dimension:
            raise ValidationError(
                f"dataset row {i}: instance has {len(x)} features, tree expects {tree.dimension}"
            )
        if y not in known:
            raise ValidationError(f"dataset row {i}: label {y.name!r} not among tree labels")

    program = encode_tree(tree)
    attacker_prog = encode_attacker(attacker, tree.dimension)
    shared = attacker_summary(attacker_prog, widening_delay)

    rows = []
    for x, y in dataset.rows:
        if per_instance:
            summary = attacker_summary(
                attacker_prog, widening_delay, initial=abstract_instance(x)
            )
        else:
            summary = shared
        rows.append(classify(tree, summary, program, x, y))
    return DatasetAnalysis(summary=shared, rows=tuple(rows))
