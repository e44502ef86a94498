"""Shared fixtures: the running example, concrete replay interpreters used
as independent oracles, random model generators, and an exact feasibility
cross-check based on vertex enumeration.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from fractions import Fraction as F

import pytest

from treecert.encoder import (
    Assume,
    AssignAffine,
    AssignInterval,
    AttackerProgram,
    Choice,
    Cond,
    Loop,
    ReturnLabel,
)
from treecert.lin import AffineExpr, LinearConstraint, Var, initial, le
from treecert.model import (
    Attacker,
    DecisionTree,
    Label,
    LabeledDataset,
    Leaf,
    RewritingRule,
    Split,
    predict,
)

# --- running example -------------------------------------------------------
#
# Two features. The tree routes on x1 first (threshold 10), then on x0
# (threshold 5). The attacker may decrease x0 by up to 1 (cost 5, enabled
# on [0, 10]) and increase x1 by up to 1 (cost 4, enabled on [5, 10]),
# with total budget 10.

PLUS = Label(0, "+1")
MINUS = Label(1, "-1")


def running_example_tree() -> DecisionTree:
    root = Split(
        1,
        F(10),
        Split(0, F(5), Leaf(PLUS), Leaf(MINUS)),
        Leaf(PLUS),
    )
    return DecisionTree(2, ("x1", "x2"), (PLUS, MINUS), root)


def running_example_attacker() -> Attacker:
    return Attacker(
        F(10),
        (
            RewritingRule(0, F(0), F(10), F(5), F(-1), F(0)),
            RewritingRule(1, F(5), F(10), F(4), F(0), F(1)),
        ),
    )


RUNNING_TREE_JSON = """{
  "dimension": 2,
  "feature_names": ["x1", "x2"],
  "labels": ["+1", "-1"],
  "root": {
    "feature": 1, "threshold": "10",
    "left": {
      "feature": 0, "threshold": "5",
      "left": {"leaf": 0},
      "right": {"leaf": 1}
    },
    "right": {"leaf": 0}
  }
}
"""

RUNNING_ATTACKER_JSON = """{
  "budget": "10",
  "rules": [
    {"feature": 0, "pre": ["0", "10"], "cost": "5", "delta": ["-1", "0"]},
    {"feature": 1, "pre": ["5", "10"], "cost": "4", "delta": ["0", "1"]}
  ]
}
"""

RUNNING_DATA_CSV = "x1,x2,label\n6,8,-1\n6,12,+1\n"


@pytest.fixture
def running_tree() -> DecisionTree:
    return running_example_tree()


@pytest.fixture
def running_attacker() -> Attacker:
    return running_example_attacker()


@pytest.fixture
def running_files(tmp_path):
    tree = tmp_path / "tree.json"
    attacker = tmp_path / "attacker.json"
    data = tmp_path / "data.csv"
    tree.write_text(RUNNING_TREE_JSON)
    attacker.write_text(RUNNING_ATTACKER_JSON)
    data.write_text(RUNNING_DATA_CSV)
    return {"tree": str(tree), "attacker": str(attacker), "data": str(data)}


# --- concrete replay interpreters ------------------------------------------
#
# Independent of the analyzer: these execute models and IR directly on
# rational values and serve as ground truth in differential tests.


def exec_init(prog, x):
    env = {initial(i): v for i, v in enumerate(x)}
    for stmt in prog.init:
        assert isinstance(stmt, AssignAffine)
        env[stmt.target] = stmt.rhs.evaluate(env)
    return env


def exec_branch(env, branch, position):
    """Run one loop branch, choosing `position` in [0,1] along each
    non-deterministic interval; returns False if an assume fails."""
    for stmt in branch:
        if isinstance(stmt, Assume):
            if not all(c.satisfied_by(env) for c in stmt.constraints):
                return False
        elif isinstance(stmt, AssignInterval):
            lo = stmt.low.evaluate(env)
            hi = stmt.high.evaluate(env)
            env[stmt.target] = lo + (hi - lo) * position
        else:
            assert isinstance(stmt, AssignAffine)
            env[stmt.target] = stmt.rhs.evaluate(env)
    return True


def branches_of(prog):
    (choice,) = prog.loop.body
    assert isinstance(choice, Choice)
    return choice.branches


def run_tree_program(prog, attacked_values) -> Label:
    node = prog
    while isinstance(node, Cond):
        if attacked_values[node.feature] <= node.threshold:
            node = node.then_branch
        else:
            node = node.else_branch
    assert isinstance(node, ReturnLabel)
    return node.label


def replay_rules(attacker: Attacker, x, steps):
    """Apply (rule_index, delta) steps; None if any condition fails.

    Returns (attacked_instance, remaining_budget, per_rule_counts).
    """
    values = list(x)
    budget = attacker.budget
    counts = [0] * len(attacker.rules)
    for j, delta in steps:
        rule = attacker.rules[j]
        value = values[rule.feature]
        if not rule.applicable(value):
            return None
        if budget < rule.cost:
            return None
        if not rule.delta_lo <= delta <= rule.delta_hi:
            return None
        values[rule.feature] = value + delta
        budget -= rule.cost
        counts[j] += 1
    return tuple(values), budget, tuple(counts)


def random_attack_steps(rng: random.Random, attacker: Attacker, x, max_steps: int):
    """A random concretely-valid attack sequence (possibly empty)."""
    values = list(x)
    budget = attacker.budget
    steps = []
    for _ in range(rng.randint(0, max_steps)):
        enabled = [
            (j, rule)
            for j, rule in enumerate(attacker.rules)
            if rule.applicable(values[rule.feature]) and rule.cost <= budget
        ]
        if not enabled:
            break
        j, rule = rng.choice(enabled)
        span = rule.delta_hi - rule.delta_lo
        delta = rule.delta_lo + span * F(rng.randint(0, 4), 4)
        values[rule.feature] += delta
        budget -= rule.cost
        steps.append((j, delta))
    return steps


# --- random model generators ------------------------------------------------


def make_labels(n: int) -> tuple[Label, ...]:
    return tuple(Label(i, f"c{i}") for i in range(n))


def random_tree(
    rng: random.Random,
    dimension: int,
    max_leaves: int,
    labels: tuple[Label, ...],
) -> DecisionTree:
    def grow(leaves: int, depth: int):
        if leaves <= 1 or depth >= 8:
            return Leaf(rng.choice(labels))
        split = rng.randint(1, leaves - 1)
        feature = rng.randrange(dimension)
        # Half-integer thresholds: integer-grid instances never land on one.
        threshold = F(2 * rng.randint(-9, 9) + 1, 2)
        return Split(feature, threshold, grow(split, depth + 1), grow(leaves - split, depth + 1))

    root = grow(rng.randint(2, max_leaves), 0)
    names = tuple(f"x{i}" for i in range(dimension))
    return DecisionTree(dimension, names, labels, root)


def random_attacker(
    rng: random.Random,
    dimension: int,
    max_rules: int = 3,
    wide_preconditions: bool = True,
) -> Attacker:
    """Random budgeted rule set.

    With wide_preconditions every rule stays enabled over the whole range
    an attack can visit, so oracle searches run in exact mode. Budgets are
    exact multiples of a shared cost, which keeps the relational analysis
    tight around counter bounds. Narrow preconditions and mixed costs
    exercise the conservative paths instead.
    """
    n_rules = rng.randint(1, min(max_rules, dimension))
    features = rng.sample(range(dimension), n_rules)
    shared_cost = F(rng.choice([1, 2, 3, 5]))
    rules = []
    for feature in features:
        if wide_preconditions:
            pre_lo, pre_hi = rng.choice(
                [(None, None), (F(-50), F(50)), (None, F(50)), (F(-50), None)]
            )
            cost = shared_cost
        else:
            center = rng.randint(-6, 6)
            pre_lo, pre_hi = F(center - rng.randint(0, 3)), F(center + rng.randint(0, 3))
            cost = F(rng.choice([1, 2, 3, 4, 5]))
        half = F(1, 2)
        lo, hi = rng.choice(
            [
                (F(-1), F(0)),
                (F(0), F(1)),
                (F(-1), F(1)),
                (F(-2), F(-1)),
                (F(1), F(2)),
                (-half, half),
                (F(-1), F(-1)),
                (F(1), F(1)),
            ]
        )
        rules.append(RewritingRule(feature, pre_lo, pre_hi, cost, lo, hi))
    max_apps = rng.randint(0, 4) if n_rules > 1 else rng.randint(0, 6)
    min_cost = min(rule.cost for rule in rules)
    budget = min_cost * max_apps
    return Attacker(budget, tuple(rules))


def random_instance(rng: random.Random, dimension: int) -> tuple[Fraction, ...]:
    return tuple(F(rng.randint(-9, 9)) for _ in range(dimension))


def random_dataset(
    rng: random.Random,
    tree: DecisionTree,
    n_rows: int,
    wrong_label_rate: float = 0.1,
) -> LabeledDataset:
    rows = []
    for _ in range(n_rows):
        x = random_instance(rng, tree.dimension)
        label = predict(tree, x)
        if rng.random() < wrong_label_rate:
            others = [l for l in tree.labels if l != label]
            if others:
                label = rng.choice(others)
        rows.append((x, label))
    return LabeledDataset(tree.feature_names, tuple(rows))


# --- random polyhedra paired with known-inside points ------------------------
#
# Points are drawn first and every generated constraint is satisfied by all
# of them, so feasibility and membership hold by construction.


def random_poly_with_points(
    rng: random.Random,
    variables: tuple[Var, ...],
    n_points: int,
    n_constraints: int,
):
    from treecert.domain import poly

    points = []
    pinned = rng.random() < 0.3 and variables
    pin_var = rng.choice(variables) if pinned else None
    pin_value = F(rng.randint(-5, 5)) if pinned else None
    for _ in range(n_points):
        env = {
            v: F(rng.randint(-16, 16), rng.choice([1, 2, 4]))
            for v in variables
        }
        if pinned:
            env[pin_var] = pin_value
        points.append(env)

    constraints = []
    if pinned:
        constraints.append(
            LinearConstraint.make(AffineExpr.of(pin_var) - pin_value, equality=True)
        )
    for _ in range(n_constraints):
        coeffs = {v: F(rng.randint(-3, 3)) for v in variables}
        if not any(coeffs.values()):
            continue
        expr = AffineExpr.make(coeffs, 0)
        bound = max(expr.evaluate(p) for p in points)
        slack = F(rng.randint(0, 8), 2)
        constraints.append(le(expr, bound + slack))
    return poly(constraints), points


def random_affine_expr(rng: random.Random, variables: tuple[Var, ...]) -> AffineExpr:
    coeffs = {v: F(rng.randint(-2, 2)) for v in variables}
    return AffineExpr.make(coeffs, F(rng.randint(-4, 4)))


# --- exact feasibility oracle (vertex enumeration) ---------------------------


def _solve_square(rows: list[tuple[list[Fraction], Fraction]]):
    """Solve the square system (lhs | rhs) exactly; None if singular."""
    n = len(rows)
    a = [list(lhs) + [rhs] for lhs, rhs in rows]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        factor = a[col][col]
        a[col] = [q / factor for q in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                scale = a[r][col]
                a[r] = [q - scale * p for q, p in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def feasible_by_vertices(
    constraints: list[LinearConstraint],
    variables: tuple[Var, ...],
    box: int = 10**6,
) -> bool:
    """Exhaustive exact feasibility check for small dimension.

    Bounds the region by a huge box; a nonempty bounded polytope has a
    vertex given by n independent active constraints, so testing every
    n-subset of hyperplanes is complete. Intended for n <= 3 and few
    constraints only.
    """
    n = len(variables)
    if n == 0:
        return all(c.expr.const <= 0 if not c.equality else c.expr.const == 0
                   for c in constraints)
    hyperplanes = []
    for c in constraints:
        hyperplanes.append(([c.expr.coeff(v) for v in variables], -c.expr.const))
    for i, v in enumerate(variables):
        unit = [F(1) if k == i else F(0) for k in range(n)]
        hyperplanes.append((unit, F(box)))
        hyperplanes.append((unit, F(-box)))

    def satisfies_all(point: list[Fraction]) -> bool:
        env = dict(zip(variables, point))
        return all(c.satisfied_by(env) for c in constraints) and all(
            abs(q) <= box for q in point
        )

    for subset in itertools.combinations(range(len(hyperplanes)), n):
        point = _solve_square([hyperplanes[k] for k in subset])
        if point is not None and satisfies_all(point):
            return True
    return False


# --- acceptance reporting -----------------------------------------------------

_ACCEPTANCE_RESULTS: dict[str, str] = {}
_ACCEPTANCE_NOTES: dict[str, str] = {}


def acceptance_note(name: str, text: str) -> None:
    """Attach a measurement to a criterion's PASS/FAIL line."""
    _ACCEPTANCE_NOTES[name] = text


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_name = getattr(report, "_acceptance_name", None)
    if marker_name is not None:
        _ACCEPTANCE_RESULTS[marker_name] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report._acceptance_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        status = "PASS" if outcome == "passed" else "FAIL"
        note = _ACCEPTANCE_NOTES.get(name)
        suffix = f"  ({note})" if note else ""
        terminalreporter.write_line(f"  {name}: {status}{suffix}")
