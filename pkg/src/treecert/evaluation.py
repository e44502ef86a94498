"""Loss metrics, oracle comparison and report rendering.

The analysis loss counts every row not certified robust; it dominates
the true loss under attack whenever the analyzer is sound, which the
compare pipeline checks row by row. Confusion counts are computed over
the correctly-classified rows only; rows already misclassified on clean
data are tallied separately. Ratios with a zero denominator are
reported as "n/a", never as 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .analyzer import Verdict
from .model import DecisionTree, Label, LabeledDataset, predict
from .oracle import OracleResult
from .rationals import format_rational

__all__ = [
    "Confusion",
    "RowReport",
    "Report",
    "clean_loss",
    "approx_loss",
    "confusion",
]


def clean_loss(tree: DecisionTree, dataset: LabeledDataset) -> Fraction:
    """Fraction of rows mispredicted without any attacker."""
    if len(dataset) == 0:
        return Fraction(0)
    wrong = sum(1 for x, y in dataset.rows if predict(tree, x) != y)
    return Fraction(wrong, len(dataset))


def approx_loss(verdicts: Sequence[Verdict]) -> Fraction:
    """Fraction of rows the analysis could not certify robust; an upper
    bound on the loss under attack."""
    if not verdicts:
        return Fraction(0)
    flagged = sum(1 for v in verdicts if v is not Verdict.CERTIFIED_ROBUST)
    return Fraction(flagged, len(verdicts))


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def fpr(self) -> Fraction | None:
        return Fraction(self.fp, self.fp + self.tn) if self.fp + self.tn else None

    @property
    def fdr(self) -> Fraction | None:
        return Fraction(self.fp, self.fp + self.tp) if self.fp + self.tp else None


@dataclass(frozen=True)
class RowReport:
    index: int
    label: Label
    predicted: Label
    verdict: Verdict
    reachable: frozenset[Label]
    oracle: OracleResult | None = None


def confusion(rows: Sequence[RowReport]) -> Confusion:
    """Flagged (not certified) versus actually attackable, over the
    correctly-classified rows; requires oracle results on every such row."""
    tp = fp = tn = fn = 0
    for row in rows:
        if row.verdict is Verdict.MISCLASSIFIED_CLEAN:
            continue
        if row.oracle is None:
            raise ValueError(f"row {row.index}: confusion needs an oracle result")
        flagged = row.verdict is Verdict.POSSIBLY_VULNERABLE
        attackable = row.oracle.found_attack(row.label)
        if flagged and attackable:
            tp += 1
        elif flagged and not attackable:
            fp += 1
        elif not flagged and not attackable:
            tn += 1
        else:
            fn += 1
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(q: Fraction | None) -> str:
    return "n/a" if q is None else format_rational(q)


@dataclass(frozen=True)
class Report:
    mode: str
    config: dict
    converged_without_widening: bool
    iterations: int
    clean_loss: Fraction
    approx_loss: Fraction
    rows: tuple[RowReport, ...]
    oracle_loss: Fraction | None = None
    oracle_exhaustive: bool | None = None
    oracle_exact_mode: bool | None = None
    counts: Confusion | None = None
    misclassified_clean: int = 0
    timing: dict[str, float] | None = None

    def to_json_dict(self) -> dict:
        summary: dict[str, object] = {
            "converged_without_widening": self.converged_without_widening,
            "iterations": self.iterations,
        }
        if not self.converged_without_widening:
            summary["note"] = (
                "widening was applied; budget-linked invariants may be weakened"
            )
        metrics: dict[str, object] = {
            "clean_loss": format_rational(self.clean_loss),
            "approx_loss": format_rational(self.approx_loss),
            "misclassified_clean": self.misclassified_clean,
        }
        if self.mode == "compare":
            metrics["oracle_loss"] = _ratio(self.oracle_loss)
            metrics["oracle_exhaustive"] = self.oracle_exhaustive
            metrics["oracle_exact_mode"] = self.oracle_exact_mode
            assert self.counts is not None
            metrics["confusion"] = {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "tn": self.counts.tn,
                "fn": self.counts.fn,
                "fpr": _ratio(self.counts.fpr),
                "fdr": _ratio(self.counts.fdr),
            }
        doc = {
            "mode": self.mode,
            "config": self.config,
            "summary": summary,
            "metrics": metrics,
            "rows": [self._row_dict(row) for row in self.rows],
        }
        if self.timing is not None:
            doc["timing"] = self.timing
        return doc

    def _row_dict(self, row: RowReport) -> dict:
        out: dict[str, object] = {
            "row": row.index,
            "clean_label": row.label.name,
            "predicted": row.predicted.name,
            "verdict": row.verdict.value,
            "reachable": [l.name for l in sorted(row.reachable, key=lambda l: l.id)],
        }
        if row.oracle is not None:
            out["oracle_attacked"] = [
                l.name for l in sorted(row.oracle.attacked_labels, key=lambda l: l.id)
            ]
            out["witness"] = _format_witness(row.oracle)
            out["oracle_exhaustive"] = row.oracle.exhaustive
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            ["row", "clean_label", "predicted", "verdict", "oracle_attacked", "witness"]
        )
        for row in self.rows:
            attacked = witness = ""
            if row.oracle is not None:
                attacked = "|".join(
                    l.name for l in sorted(row.oracle.attacked_labels, key=lambda l: l.id)
                )
                witness = _format_witness(row.oracle) or ""
            writer.writerow(
                [
                    row.index,
                    row.label.name,
                    row.predicted.name,
                    row.verdict.value,
                    attacked,
                    witness,
                ]
            )
        return buffer.getvalue()

    def to_text(self) -> str:
        lines = [f"treecert {self.mode} report"]
        lines.append(f"  rows analyzed: {len(self.rows)}")
        lines.append(f"  clean loss: {_pretty(self.clean_loss)}")
        lines.append(f"  approx loss: {_pretty(self.approx_loss)}")
        lines.append(f"  misclassified clean: {self.misclassified_clean}")
        if not self.converged_without_widening:
            lines.append("  note: widening applied, budget-linked invariants may be weakened")
        if self.mode == "compare" and self.counts is not None:
            assert self.oracle_loss is not None
            lines.append(f"  oracle loss: {_pretty(self.oracle_loss)}")
            if not self.oracle_exhaustive:
                lines.append("  note: oracle truncated, oracle loss is a lower bound")
            c = self.counts
            lines.append(
                f"  confusion: tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn} "
                f"fpr={_ratio(c.fpr)} fdr={_ratio(c.fdr)}"
            )
        if self.timing:
            for key in sorted(self.timing):
                lines.append(f"  {key}: {self.timing[key]:.3f}s")
        lines.append("")
        header = f"{'row':>5}  {'label':>8}  {'predicted':>9}  verdict"
        lines.append(header)
        for row in self.rows:
            extra = ""
            if row.oracle is not None and row.oracle.found_attack(row.label):
                extra = "  [attack found]"
            lines.append(
                f"{row.index:>5}  {row.label.name:>8}  {row.predicted.name:>9}  "
                f"{row.verdict.value}{extra}"
            )
        return "\n".join(lines) + "\n"


def _pretty(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q)
    return f"{q} (~{float(q):.4f})"


def _format_witness(result: OracleResult) -> str | None:
    if result.witness is None:
        return None
    return ";".join(f"{j}:{format_rational(d)}" for j, d in result.witness)
