"""Brute-force attack enumeration used as ground truth.

Breadth-first search over attack states (instance, remaining budget),
memoized exactly on that pair. Per-feature deltas are discretized to the
rule's extreme perturbations plus, for every tree threshold in reach,
the shift landing exactly on the threshold and the shift landing just
above it (half the smallest relevant gap), which covers every way a
single application can change the outcome of a closed-left split.

The search is complete for label reachability when preconditions never
bind on the explored states; the `exact_mode` flag reports whether that
held. `exhaustive` tells whether the frontier was fully drained within
the state budget; when it is false the result is a lower bound on the
attacker's power, never an upper bound.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .model import (
    Attacker,
    DecisionTree,
    Instance,
    Label,
    LabeledDataset,
    Leaf,
    RewritingRule,
    predict,
    validate_attacker_for,
)

__all__ = [
    "OracleResult",
    "candidate_deltas",
    "enumerate_attacks",
    "loss_under_attack",
    "thresholds_by_feature",
    "DEFAULT_MAX_STATES",
]

DEFAULT_MAX_STATES = 1_000_000


@dataclass(frozen=True)
class OracleResult:
    attacked_labels: frozenset[Label]
    witness: tuple[tuple[int, Fraction], ...] | None
    witness_instance: Instance | None
    exhaustive: bool
    exact_mode: bool
    visited: int

    def found_attack(self, clean: Label) -> bool:
        return any(label != clean for label in self.attacked_labels)


def thresholds_by_feature(tree: DecisionTree) -> dict[int, tuple[Fraction, ...]]:
    found: dict[int, set[Fraction]] = {}
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            continue
        found.setdefault(node.feature, set()).add(node.threshold)
        stack.extend((node.left, node.right))
    return {f: tuple(sorted(vals)) for f, vals in found.items()}


def candidate_deltas(
    rule: RewritingRule,
    value: Fraction,
    thresholds: Sequence[Fraction],
) -> tuple[Fraction, ...]:
    """Perturbations worth trying from `value` under `rule`: the interval
    endpoints, exact landings on each threshold, and landings just above
    each threshold (epsilon = half the smallest nonzero gap among the
    relevant points, recomputed per call)."""
    lo, hi = rule.delta_lo, rule.delta_hi
    relevant = set(thresholds) | {value, value + lo, value + hi}
    points = sorted(relevant)
    gaps = [b - a for a, b in zip(points, points[1:]) if b != a]
    epsilon = min(gaps) / 2 if gaps else Fraction(1)

    out = {lo, hi}
    for v in thresholds:
        for target in (v, v + epsilon):
            delta = target - value
            if lo <= delta <= hi:
                out.add(delta)
    return tuple(sorted(out))


def enumerate_attacks(
    tree: DecisionTree,
    attacker: Attacker,
    x: Instance,
    max_states: int = DEFAULT_MAX_STATES,
) -> OracleResult:
    """All labels the attacker can reach from `x`, with a replayable
    witness for the first label different from the clean prediction."""
    validate_attacker_for(attacker, tree.dimension)
    if max_states < 1:
        raise ValueError("max_states must be >= 1")
    x = tuple(x)
    clean = predict(tree, x)
    thresholds = thresholds_by_feature(tree)

    State = tuple[Instance, Fraction]
    start: State = (x, attacker.budget)
    parents: dict[State, tuple[State, int, Fraction] | None] = {start: None}
    queue: deque[State] = deque((start,))
    labels = {clean}
    witness_state: State | None = None
    pre_contained = [True] * len(attacker.rules)

    def record_values(instance: Instance) -> None:
        for j, rule in enumerate(attacker.rules):
            if pre_contained[j] and not rule.applicable(instance[rule.feature]):
                pre_contained[j] = False

    record_values(x)
    truncated = False
    while queue and not truncated:
        instance, budget = queue.popleft()
        for j, rule in enumerate(attacker.rules):
            if rule.cost > budget or not rule.applicable(instance[rule.feature]):
                continue
            for delta in candidate_deltas(
                rule, instance[rule.feature], thresholds.get(rule.feature, ())
            ):
                moved = list(instance)
                moved[rule.feature] += delta
                state: State = (tuple(moved), budget - rule.cost)
                if state in parents:
                    continue
                if len(parents) >= max_states:
                    truncated = True
                    break
                parents[state] = ((instance, budget), j, delta)
                queue.append(state)
                record_values(state[0])
                label = predict(tree, state[0])
                labels.add(label)
                if witness_state is None and label != clean:
                    witness_state = state
            if truncated:
                break

    witness = None
    witness_instance = None
    if witness_state is not None:
        steps = []
        cursor: State | None = witness_state
        while cursor is not None:
            entry = parents[cursor]
            if entry is None:
                break
            parent, j, delta = entry
            steps.append((j, delta))
            cursor = parent
        witness = tuple(reversed(steps))
        witness_instance = witness_state[0]

    return OracleResult(
        attacked_labels=frozenset(labels),
        witness=witness,
        witness_instance=witness_instance,
        exhaustive=not truncated,
        exact_mode=all(pre_contained),
        visited=len(parents),
    )


def oracle_rows(
    tree: DecisionTree,
    dataset: LabeledDataset,
    attacker: Attacker,
    max_states: int = DEFAULT_MAX_STATES,
) -> list[OracleResult]:
    return [
        enumerate_attacks(tree, attacker, x, max_states) for x, _ in dataset.rows
    ]


def loss_under_attack(
    tree: DecisionTree,
    dataset: LabeledDataset,
    attacker: Attacker,
    max_states: int = DEFAULT_MAX_STATES,
    results: Iterable[OracleResult] | None = None,
) -> Fraction:
    """Fraction of rows where some reachable instance is classified
    differently from the row label; 0 on an empty dataset by convention.
    A lower bound whenever the search was not exhaustive."""
    if len(dataset) == 0:
        return Fraction(0)
    if results is None:
        results = oracle_rows(tree, dataset, attacker, max_states)
    hit = 0
    for (x, y), result in zip(dataset.rows, results):
        if any(label != y for label in result.attacked_labels):
            hit += 1
    return Fraction(hit, len(dataset))
