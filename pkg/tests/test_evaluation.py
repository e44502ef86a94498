import json
from fractions import Fraction as F

import pytest

from conftest import PLUS, MINUS, running_example_attacker, running_example_tree
from treecert.analyzer import Verdict
from treecert.evaluation import (
    Confusion,
    Report,
    RowReport,
    approx_loss,
    clean_loss,
    confusion,
)
from treecert.model import LabeledDataset
from treecert.oracle import OracleResult


def oracle_result(labels, witness=None, witness_instance=None):
    return OracleResult(
        attacked_labels=frozenset(labels),
        witness=witness,
        witness_instance=witness_instance,
        exhaustive=True,
        exact_mode=True,
        visited=1,
    )


def row(index, verdict, label=MINUS, oracle=None):
    return RowReport(
        index=index,
        label=label,
        predicted=label if verdict is not Verdict.MISCLASSIFIED_CLEAN else PLUS,
        verdict=verdict,
        reachable=frozenset({label}),
        oracle=oracle,
    )


class TestLosses:
    def test_clean_loss_counts_mispredictions(self):
        tree = running_example_tree()
        data = LabeledDataset(
            ("x1", "x2"),
            (
                ((F(6), F(8)), MINUS),   # predicted -1, correct
                ((F(6), F(8)), PLUS),    # predicted -1, wrong
            ),
        )
        assert clean_loss(tree, data) == F(1, 2)

    def test_clean_loss_empty(self):
        assert clean_loss(running_example_tree(), LabeledDataset(("a", "b"), ())) == 0

    def test_approx_loss_counts_uncertified(self):
        verdicts = [
            Verdict.CERTIFIED_ROBUST,
            Verdict.POSSIBLY_VULNERABLE,
            Verdict.MISCLASSIFIED_CLEAN,
            Verdict.CERTIFIED_ROBUST,
        ]
        assert approx_loss(verdicts) == F(1, 2)

    def test_approx_loss_empty(self):
        assert approx_loss([]) == 0


class TestConfusion:
    def test_four_quadrants(self):
        rows = [
            row(0, Verdict.POSSIBLY_VULNERABLE, oracle=oracle_result({PLUS, MINUS})),
            row(1, Verdict.POSSIBLY_VULNERABLE, oracle=oracle_result({MINUS})),
            row(2, Verdict.CERTIFIED_ROBUST, oracle=oracle_result({MINUS})),
            row(3, Verdict.CERTIFIED_ROBUST, oracle=oracle_result({PLUS, MINUS})),
        ]
        counts = confusion(rows)
        assert (counts.tp, counts.fp, counts.tn, counts.fn) == (1, 1, 1, 1)
        assert counts.fpr == F(1, 2)
        assert counts.fdr == F(1, 2)

    def test_misclassified_clean_rows_excluded(self):
        rows = [
            row(0, Verdict.MISCLASSIFIED_CLEAN),
            row(1, Verdict.CERTIFIED_ROBUST, oracle=oracle_result({MINUS})),
        ]
        counts = confusion(rows)
        assert (counts.tp, counts.fp, counts.tn, counts.fn) == (0, 0, 1, 0)

    def test_missing_oracle_rejected(self):
        with pytest.raises(ValueError, match="oracle"):
            confusion([row(0, Verdict.CERTIFIED_ROBUST)])

    def test_zero_denominators_are_none(self):
        counts = Confusion(tp=0, fp=0, tn=0, fn=0)
        assert counts.fpr is None
        assert counts.fdr is None
        counts = Confusion(tp=3, fp=0, tn=0, fn=0)
        assert counts.fpr is None
        assert counts.fdr == 0


def make_report(mode="verify", **overrides):
    defaults = dict(
        mode=mode,
        config={"tree": "t.json"},
        converged_without_widening=True,
        iterations=4,
        clean_loss=F(0),
        approx_loss=F(1, 3),
        rows=(
            row(
                0,
                Verdict.POSSIBLY_VULNERABLE,
                oracle=oracle_result(
                    {PLUS, MINUS}, witness=((0, F(-1)),), witness_instance=(F(5), F(8))
                ),
            )
            if mode == "compare"
            else row(0, Verdict.POSSIBLY_VULNERABLE),
        ),
    )
    if mode == "compare":
        defaults.update(
            oracle_loss=F(1, 3),
            oracle_exhaustive=True,
            oracle_exact_mode=True,
            counts=Confusion(tp=1, fp=0, tn=0, fn=0),
        )
    defaults.update(overrides)
    return Report(**defaults)


class TestReportRendering:
    def test_json_is_deterministic(self):
        assert make_report().to_json() == make_report().to_json()

    def test_json_ratios_are_exact_strings(self):
        doc = json.loads(make_report(mode="compare").to_json())
        assert doc["metrics"]["approx_loss"] == "1/3"
        assert doc["metrics"]["oracle_loss"] == "1/3"
        assert doc["metrics"]["confusion"]["fpr"] == "n/a"
        assert doc["metrics"]["confusion"]["fdr"] == "0"

    def test_json_row_fields(self):
        doc = json.loads(make_report(mode="compare").to_json())
        (r,) = doc["rows"]
        assert r["witness"] == "0:-1"
        assert r["oracle_attacked"] == ["+1", "-1"]
        assert r["verdict"] == "PossiblyVulnerable"

    def test_widening_note_in_json(self):
        doc = json.loads(make_report(converged_without_widening=False).to_json())
        assert "weakened" in doc["summary"]["note"]

    def test_csv_layout(self):
        text = make_report(mode="compare").to_csv()
        lines = text.splitlines()
        assert lines[0] == "row,clean_label,predicted,verdict,oracle_attacked,witness"
        assert lines[1] == "0,-1,-1,PossiblyVulnerable,+1|-1,0:-1"

    def test_text_mentions_truncation(self):
        report = make_report(mode="compare", oracle_exhaustive=False)
        assert "lower bound" in report.to_text()

    def test_text_flags_found_attacks(self):
        assert "[attack found]" in make_report(mode="compare").to_text()

    def test_timing_block_only_when_present(self):
        silent = make_report()
        timed = make_report(timing={"analysis_seconds": 0.125})
        assert "timing" not in silent.to_json_dict()
        assert timed.to_json_dict()["timing"] == {"analysis_seconds": 0.125}
