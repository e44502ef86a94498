"""Convert fitted scikit-learn decision-tree classifiers to the tree
JSON schema consumed by treecert.

The exported document is self-contained JSON: labels are the
classifier's classes in sklearn order, the left child of every split is
the `<=` branch, and thresholds become shortest round-trip decimal
strings of the stored float64 values (`repr`). Downstream verification
is exact with respect to those decimal thresholds; the original binary
floats round-trip through them unchanged, but inputs that sklearn would
first cast to float32 can in principle fall on the other side of a
threshold than their exact decimal value does. Points exactly
representable in float32 (for instance quarter-unit grids) are immune.
"""

from __future__ import annotations

import json
from typing import Sequence

import joblib

__version__ = "0.1.0"

__all__ = [
    "ConversionError",
    "export",
    "export_tree",
    "load_estimator",
]


class ConversionError(Exception):
    """Input that cannot be turned into a tree document."""


def load_estimator(path: str):
    """Unpickle a model file; wraps I/O and unpickling problems."""
    try:
        return joblib.load(path)
    except OSError as exc:
        raise ConversionError(f"cannot read model file {path!r}: {exc.strerror}") from exc
    except Exception as exc:  # joblib surfaces assorted unpickling errors
        raise ConversionError(f"cannot unpickle model file {path!r}: {exc}") from exc


def export_tree(model, feature_names: Sequence[str] | None = None) -> dict:
    """Tree JSON document (as a dict) for a fitted classifier.

    Rejects anything that is not a single fitted single-output
    DecisionTreeClassifier: ensembles have no one tree to export, and
    regressors have no label set.
    """
    from sklearn.tree import DecisionTreeClassifier

    if hasattr(model, "estimators_") or hasattr(model, "estimator"):
        raise ConversionError(
            f"{type(model).__name__} looks like an ensemble; export a single tree"
        )
    if not isinstance(model, DecisionTreeClassifier):
        raise ConversionError(
            f"unsupported estimator {type(model).__name__}; "
            "expected DecisionTreeClassifier"
        )
    if not hasattr(model, "tree_"):
        raise ConversionError("model is not fitted")
    if model.n_outputs_ != 1:
        raise ConversionError("multi-output trees are not supported")

    dimension = int(model.n_features_in_)
    if feature_names is None:
        names = [f"x{i}" for i in range(dimension)]
    else:
        names = [str(n) for n in feature_names]
        if len(names) != dimension:
            raise ConversionError(
                f"got {len(names)} feature names, model has {dimension} features"
            )

    return {
        "dimension": dimension,
        "feature_names": names,
        "labels": [str(c) for c in model.classes_],
        "root": _node(model.tree_, 0),
    }


def _node(tree, index: int) -> dict:
    if tree.children_left[index] < 0:
        # leaf: predict the majority class, argmax ties break like sklearn
        counts = tree.value[index][0]
        return {"leaf": int(counts.argmax())}
    return {
        "feature": int(tree.feature[index]),
        "threshold": repr(float(tree.threshold[index])),
        "left": _node(tree, int(tree.children_left[index])),
        "right": _node(tree, int(tree.children_right[index])),
    }


def export(
    model_path: str,
    feature_names: Sequence[str] | None = None,
    out_path: str | None = None,
) -> dict:
    """Load, convert, and optionally write the document as JSON."""
    document = export_tree(load_estimator(model_path), feature_names)
    if out_path is not None:
        try:
            with open(out_path, "w", encoding="utf-8") as handle:
                json.dump(document, handle, indent=2)
                handle.write("\n")
        except OSError as exc:
            raise ConversionError(
                f"cannot write {out_path!r}: {exc.strerror}"
            ) from exc
    return document
