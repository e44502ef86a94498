"""Regenerate the golden export fixture checked into the verifier repo.

Trains a small depth-6 tree on a seeded synthetic task, exports it, and
freezes 1,000 grid-point predictions next to it. Run from anywhere:

    python3 sklearn_export/scripts/make_golden.py
"""

from __future__ import annotations

import csv
import json
import pathlib

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from sklearn_export import export_tree

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"
SEED = 20240817
FEATURES = ("f0", "f1", "f2", "f3")


def quarter_grid(rng: np.random.Generator, shape) -> np.ndarray:
    # exact in float32, so sklearn's internal cast cannot shift a point
    return rng.integers(-40, 41, shape).astype(np.float64) / 4.0


def main(out_dir: pathlib.Path = FIXTURES) -> None:
    rng = np.random.default_rng(SEED)
    X = quarter_grid(rng, (600, len(FEATURES)))
    y = (X[:, 0] + X[:, 1] > 0).astype(int) + (X[:, 2] > 1.0).astype(int)
    flip = rng.random(len(y)) < 0.05
    y[flip] = rng.integers(0, 3, flip.sum())

    model = DecisionTreeClassifier(max_depth=6, random_state=0).fit(X, y)
    document = export_tree(model, FEATURES)

    points = quarter_grid(rng, (1000, len(FEATURES)))
    predictions = model.predict(points)

    out_dir.mkdir(parents=True, exist_ok=True)
    tree_path = out_dir / "sklearn_tree.json"
    with open(tree_path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")

    data_path = out_dir / "sklearn_predictions.csv"
    with open(data_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(FEATURES) + ["label"])
        for x, label in zip(points, predictions):
            writer.writerow([repr(float(v)) for v in x] + [str(label)])

    depth = model.get_depth()
    print(f"wrote {tree_path} (depth {depth}) and {data_path} (1000 rows)")


if __name__ == "__main__":
    main()
