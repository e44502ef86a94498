"""Sound certification of decision trees against budgeted rewriting attacks."""

from .analyzer import (
    DEFAULT_WIDENING_DELAY,
    AttackerSummary,
    DatasetAnalysis,
    RowResult,
    SoundnessError,
    Verdict,
    analyze_dataset,
    attacker_summary,
    classify,
    reachable_labels,
)
from .encoder import encode_attacker, encode_tree
from .evaluation import Report, approx_loss, clean_loss, confusion
from .model import (
    Attacker,
    DecisionTree,
    InputError,
    Instance,
    Label,
    LabeledDataset,
    ParseError,
    RewritingRule,
    ValidationError,
    load_attacker,
    load_dataset,
    load_tree,
    predict,
)
from .oracle import OracleResult, enumerate_attacks, loss_under_attack

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DEFAULT_WIDENING_DELAY",
    "Attacker",
    "AttackerSummary",
    "DatasetAnalysis",
    "DecisionTree",
    "InputError",
    "Instance",
    "Label",
    "LabeledDataset",
    "OracleResult",
    "ParseError",
    "Report",
    "RewritingRule",
    "RowResult",
    "SoundnessError",
    "ValidationError",
    "Verdict",
    "analyze_dataset",
    "approx_loss",
    "attacker_summary",
    "classify",
    "clean_loss",
    "confusion",
    "encode_attacker",
    "encode_tree",
    "enumerate_attacks",
    "load_attacker",
    "load_dataset",
    "load_tree",
    "loss_under_attack",
    "predict",
    "reachable_labels",
]
