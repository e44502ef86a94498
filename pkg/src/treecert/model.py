"""Classifier, attacker and dataset model with exact loaders.

Trees are binary threshold trees: an instance goes left iff
x[feature] <= threshold. Attackers are finite sets of rewriting rules
with a global budget; a rule may fire when the current value of its
feature lies inside the precondition interval and enough budget is
left, and then shifts that feature by any amount in [delta_lo, delta_hi]
at the stated cost.

Loaders parse JSON/CSV documents, validate them and report violations
with a location (JSON path or CSV row/column).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .rationals import format_decimal, parse_endpoint, parse_rational

__all__ = [
    "InputError",
    "ParseError",
    "ValidationError",
    "Label",
    "Leaf",
    "Split",
    "TreeNode",
    "DecisionTree",
    "Instance",
    "LabeledDataset",
    "RewritingRule",
    "Attacker",
    "predict",
    "load_tree",
    "dump_tree",
    "load_attacker",
    "load_dataset",
]


class InputError(Exception):
    """A problem with user-supplied input (exit code 2 at the CLI)."""


class ParseError(InputError):
    """Malformed document: bad JSON/CSV syntax or a value that does not parse."""


class ValidationError(InputError):
    """Well-formed document violating a model invariant."""


@dataclass(frozen=True)
class Label:
    """Class label; ids are dense indices into the declared label list."""

    id: int
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Leaf:
    label: Label


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: Fraction
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]

# An instance is a point in Q^d; tuples keep it hashable for memoization.
Instance = tuple[Fraction, ...]


@dataclass(frozen=True)
class DecisionTree:
    dimension: int
    feature_names: tuple[str, ...]
    labels: tuple[Label, ...]
    root: TreeNode

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []
        stack: list[TreeNode] = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend((node.right, node.left))
        return out


@dataclass(frozen=True)
class LabeledDataset:
    feature_names: tuple[str, ...]
    rows: tuple[tuple[Instance, Label], ...]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class RewritingRule:
    """One attack step: if pre_lo <= x[feature] <= pre_hi, pay `cost` and
    add any amount in [delta_lo, delta_hi] to that feature.

    Precondition endpoints of None are unbounded on that side.
    """

    feature: int
    pre_lo: Fraction | None
    pre_hi: Fraction | None
    cost: Fraction
    delta_lo: Fraction
    delta_hi: Fraction

    def applicable(self, value: Fraction) -> bool:
        if self.pre_lo is not None and value < self.pre_lo:
            return False
        if self.pre_hi is not None and value > self.pre_hi:
            return False
        return True


@dataclass(frozen=True)
class Attacker:
    budget: Fraction
    rules: tuple[RewritingRule, ...]


def predict(tree: DecisionTree, x: Sequence[Fraction]) -> Label:
    """Classify `x`; goes left iff x[feature] <= threshold."""
    if len(x) != tree.dimension:
        raise ValidationError(
            f"instance has {len(x)} features, tree expects {tree.dimension}"
        )
    node = tree.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


# ---------------------------------------------------------------------------
# Loading

def _loads(document: str, what: str) -> object:
    try:
        # parse_float=str keeps float literals as their source text so they
        # can be converted exactly.
        return json.loads(document, parse_float=str)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc


def _require(mapping: object, key: str, path: str) -> object:
    if not isinstance(mapping, dict):
        raise ParseError(f"{path}: expected an object")
    if key not in mapping:
        raise ParseError(f"{path}: missing key {key!r}")
    return mapping[key]


def _parse_node(doc: object, path: str, dimension: int, labels: tuple[Label, ...]) -> TreeNode:
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected an object")
    if "leaf" in doc:
        raw = doc["leaf"]
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ParseError(f"{path}.leaf: expected an integer label id")
        if not 0 <= raw < len(labels):
            raise ValidationError(
                f"{path}.leaf: label id {raw} out of range [0, {len(labels)})"
            )
        return Leaf(labels[raw])
    if "feature" not in doc:
        raise ParseError(f"{path}: node needs either 'leaf' or 'feature'")
    feature = doc["feature"]
    if not isinstance(feature, int) or isinstance(feature, bool):
        raise ParseError(f"{path}.feature: expected an integer index")
    if not 0 <= feature < dimension:
        raise ValidationError(f"{path}.feature: index {feature} out of range [0, {dimension})")
    try:
        threshold = parse_rational(_require(doc, "threshold", path), f"{path}.threshold")
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    left = _parse_node(_require(doc, "left", path), f"{path}.left", dimension, labels)
    right = _parse_node(_require(doc, "right", path), f"{path}.right", dimension, labels)
    return Split(feature, threshold, left, right)


def load_tree(document: str) -> DecisionTree:
    """Parse a tree JSON document.

    Schema: {"dimension": d, "feature_names": [...], "labels": [...],
    "root": node} with node either {"leaf": id} or {"feature": i,
    "threshold": "decimal", "left": node, "right": node}. feature_names
    is optional and defaults to x0..x{d-1}.
    """
    doc = _loads(document, "tree")
    dimension = _require(doc, "dimension", "tree")
    if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 1:
        raise ValidationError("tree.dimension: expected a positive integer")
    raw_labels = _require(doc, "labels", "tree")
    if not isinstance(raw_labels, list) or not all(isinstance(s, str) for s in raw_labels):
        raise ParseError("tree.labels: expected a list of strings")
    if len(raw_labels) < 2:
        raise ValidationError("tree.labels: need at least 2 labels")
    if len(set(raw_labels)) != len(raw_labels):
        raise ValidationError("tree.labels: duplicate label names")
    labels = tuple(Label(i, name) for i, name in enumerate(raw_labels))
    assert isinstance(doc, dict)
    raw_names = doc.get("feature_names")
    if raw_names is None:
        feature_names = tuple(f"x{i}" for i in range(dimension))
    else:
        if not isinstance(raw_names, list) or not all(isinstance(s, str) for s in raw_names):
            raise ParseError("tree.feature_names: expected a list of strings")
        if len(raw_names) != dimension:
            raise ValidationError(
                f"tree.feature_names: got {len(raw_names)} names for dimension {dimension}"
            )
        feature_names = tuple(raw_names)
    root = _parse_node(_require(doc, "root", "tree"), "tree.root", dimension, labels)
    return DecisionTree(dimension, feature_names, labels, root)


def _dump_node(node: TreeNode) -> object:
    if isinstance(node, Leaf):
        return {"leaf": node.label.id}
    return {
        "feature": node.feature,
        "threshold": format_decimal(node.threshold),
        "left": _dump_node(node.left),
        "right": _dump_node(node.right),
    }


def dump_tree(tree: DecisionTree) -> str:
    doc = {
        "dimension": tree.dimension,
        "feature_names": list(tree.feature_names),
        "labels": [label.name for label in tree.labels],
        "root": _dump_node(tree.root),
    }
    return json.dumps(doc, indent=2) + "\n"


def load_attacker(document: str) -> Attacker:
    """Parse an attacker JSON document.

    Schema: {"budget": "decimal", "rules": [{"feature": i,
    "pre": [lo, hi], "cost": "decimal", "delta": [lo, hi]}]} where
    precondition endpoints may be "-inf"/"inf".
    """
    doc = _loads(document, "attacker")
    try:
        budget = parse_rational(_require(doc, "budget", "attacker"), "attacker.budget")
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if budget < 0:
        raise ValidationError("attacker.budget: must be >= 0")
    raw_rules = _require(doc, "rules", "attacker")
    if not isinstance(raw_rules, list):
        raise ParseError("attacker.rules: expected a list")
    rules = []
    for i, raw in enumerate(raw_rules):
        path = f"attacker.rules[{i}]"
        feature = _require(raw, "feature", path)
        if not isinstance(feature, int) or isinstance(feature, bool) or feature < 0:
            raise ParseError(f"{path}.feature: expected a non-negative integer")
        pre = _require(raw, "pre", path)
        if not isinstance(pre, list) or len(pre) != 2:
            raise ParseError(f"{path}.pre: expected [lo, hi]")
        try:
            pre_lo = parse_endpoint(pre[0], f"{path}.pre[0]")
            pre_hi = parse_endpoint(pre[1], f"{path}.pre[1]")
            cost = parse_rational(_require(raw, "cost", path), f"{path}.cost")
            delta = _require(raw, "delta", path)
            if not isinstance(delta, list) or len(delta) != 2:
                raise ParseError(f"{path}.delta: expected [lo, hi]")
            delta_lo = parse_rational(delta[0], f"{path}.delta[0]")
            delta_hi = parse_rational(delta[1], f"{path}.delta[1]")
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
        if pre_lo is not None and pre_hi is not None and pre_lo > pre_hi:
            raise ValidationError(f"{path}.pre: empty interval")
        if cost < 0:
            raise ValidationError(f"{path}.cost: must be >= 0")
        if delta_lo > delta_hi:
            raise ValidationError(f"{path}.delta: lo > hi")
        rules.append(RewritingRule(feature, pre_lo, pre_hi, cost, delta_lo, delta_hi))
    return Attacker(budget, tuple(rules))


def validate_attacker_for(attacker: Attacker, dimension: int) -> None:
    """Check rule feature indices against a tree dimension."""
    for i, rule in enumerate(attacker.rules):
        if rule.feature >= dimension:
            raise ValidationError(
                f"attacker.rules[{i}].feature: index {rule.feature} out of range [0, {dimension})"
            )


def load_dataset(
    document: str,
    label_column: str = "label",
    feature_names: Sequence[str] | None = None,
    labels: Sequence[Label] | None = None,
) -> LabeledDataset:
    """Parse a CSV dataset with a header row.

    Feature columns are matched by name when `feature_names` is given,
    otherwise every non-label column is a feature in header order.
    Label cells are resolved against `labels` by name, falling back to
    numeric id; without a declared label set, distinct label names get
    ids in sorted order.
    """
    reader = csv.reader(io.StringIO(document))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("dataset: empty document, expected a header row") from None
    header = [h.strip() for h in header]
    if label_column not in header:
        raise ParseError(f"dataset: no column named {label_column!r} in header")
    if header.count(label_column) > 1:
        raise ParseError(f"dataset: duplicate column {label_column!r}")
    label_index = header.index(label_column)
    if feature_names is None:
        names = tuple(h for i, h in enumerate(header) if i != label_index)
        columns = [i for i in range(len(header)) if i != label_index]
    else:
        names = tuple(feature_names)
        columns = []
        for name in names:
            if header.count(name) > 1:
                raise ParseError(f"dataset: duplicate column {name!r}")
            if name not in header:
                raise ParseError(f"dataset: no column named {name!r} in header")
            columns.append(header.index(name))

    raw_rows: list[tuple[Instance, str]] = []
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"dataset row {row_number}: got {len(row)} cells, header has {len(header)}"
            )
        values = []
        for col in columns:
            try:
                values.append(parse_rational(row[col].strip(), ""))
            except ValueError:
                raise ParseError(
                    f"dataset row {row_number}, column {header[col]!r}: "
                    f"not a decimal number: {row[col]!r}"
                ) from None
        raw_rows.append((tuple(values), row[label_index].strip()))

    if labels is None:
        names_seen = sorted({name for _, name in raw_rows})
        labels = [Label(i, name) for i, name in enumerate(names_seen)]
    by_name = {label.name: label for label in labels}
    by_id = {label.id: label for label in labels}
    rows: list[tuple[Instance, Label]] = []
    for row_number, (values, cell) in enumerate(raw_rows, start=0):
        label = by_name.get(cell)
        if label is None and cell.lstrip("+-").isdigit():
            label = by_id.get(int(cell))
        if label is None:
            raise ParseError(
                f"dataset row {row_number + 2}, column {label_column!r}: "
                f"unknown label {cell!r}"
            )
        rows.append((values, label))
    return LabeledDataset(names, tuple(rows))
