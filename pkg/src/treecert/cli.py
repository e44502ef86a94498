"""Command-line front end.

Two subcommands: `verify` runs the abstract analysis and reports
verdicts; `compare` additionally runs the enumeration oracle per row,
checks that nothing certified robust is actually attackable, and
reports confusion metrics.

Exit codes: 0 on success, 2 on input problems (unreadable files, parse
or validation errors), 3 when the analyzer detects it produced an
unsound result. Reports are only written after the whole run succeeds.
Set TREECERT_LOG=debug for progress logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .analyzer import (
    DEFAULT_WIDENING_DELAY,
    SoundnessError,
    Verdict,
    attacker_summary,
    classify,
    reachable_labels,
)
from .domain import abstract_instance, format_poly
from .encoder import (
    encode_attacker,
    encode_tree,
    format_attacker_program,
    format_tree_program,
)
from .evaluation import Report, RowReport, approx_loss, clean_loss, confusion
from .model import (
    Attacker,
    DecisionTree,
    InputError,
    LabeledDataset,
    ValidationError,
    load_attacker,
    load_dataset,
    load_tree,
    validate_attacker_for,
)
from .oracle import DEFAULT_MAX_STATES, enumerate_attacks, loss_under_attack

log = logging.getLogger("treecert")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    tree_path: str
    attacker_path: str
    data_path: str
    label_column: str
    widening_delay: int
    per_instance_summary: bool
    oracle_max_states: int
    out_json: str | None
    out_csv: str | None
    dump_ir: bool
    dump_summary: bool
    jobs: int
    no_timing: bool


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecert",
        description="certify decision trees against budgeted rewriting attacks",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("verify", "compare"):
        p = sub.add_parser(
            mode,
            help="abstract analysis only" if mode == "verify"
            else "abstract analysis checked against the enumeration oracle",
        )
        p.add_argument("--tree", required=True, help="tree JSON file")
        p.add_argument("--attacker", required=True, help="attacker JSON file")
        p.add_argument("--data", required=True, help="dataset CSV file")
        p.add_argument("--label-column", default="label")
        p.add_argument("--widening-delay", type=int, default=DEFAULT_WIDENING_DELAY)
        p.add_argument(
            "--per-instance-summary",
            action="store_true",
            help="recompute the attacker fixpoint per instance (slower, more precise)",
        )
        p.add_argument("--out-json", default=None, help="write the JSON report here")
        p.add_argument("--out-csv", default=None, help="write the per-row CSV here")
        p.add_argument("--dump-ir", action="store_true", help="print the encoded programs")
        p.add_argument(
            "--dump-summary", action="store_true", help="print the attacker summary"
        )
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument(
            "--no-timing",
            action="store_true",
            help="omit timings from reports, for byte-identical output",
        )
        if mode == "compare":
            p.add_argument("--oracle-max-states", type=int, default=DEFAULT_MAX_STATES)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        mode=args.mode,
        tree_path=args.tree,
        attacker_path=args.attacker,
        data_path=args.data,
        label_column=args.label_column,
        widening_delay=args.widening_delay,
        per_instance_summary=args.per_instance_summary,
        oracle_max_states=getattr(args, "oracle_max_states", DEFAULT_MAX_STATES),
        out_json=args.out_json,
        out_csv=args.out_csv,
        dump_ir=args.dump_ir,
        dump_summary=args.dump_summary,
        jobs=max(1, args.jobs),
        no_timing=args.no_timing,
    )


def _read(path: str, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path!r}: {exc.strerror}") from exc


# Worker context for process pools; populated once per worker process.
_CTX: dict = {}


def _init_ctx(ctx: dict) -> None:
    _CTX.update(ctx)


def _analyze_row(item: tuple[int, tuple]) -> RowReport:
    index, (x, y) = item
    if _CTX["per_instance"]:
        summary = attacker_summary(
            _CTX["attacker_program"],
            _CTX["widening_delay"],
            initial=abstract_instance(x),
        )
    else:
        summary = _CTX["summary"]
    result = classify(_CTX["tree"], summary, _CTX["tree_program"], x, y)
    return RowReport(
        index=index,
        label=y,
        predicted=result.predicted,
        verdict=result.verdict,
        reachable=result.reachable,
    )


def _oracle_row(item: tuple[int, tuple]) -> "object":
    index, (x, y) = item
    return enumerate_attacks(
        _CTX["tree"], _CTX["attacker"], x, _CTX["oracle_max_states"]
    )


def _map_rows(fn: Callable, items: Sequence, jobs: int, ctx: dict) -> list:
    if jobs <= 1 or len(items) <= 1:
        _init_ctx(ctx)
        return [fn(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_ctx, initargs=(ctx,)
    ) as pool:
        return list(pool.map(fn, items))


def run(cfg: RunConfig) -> Report:
    tree = load_tree(_read(cfg.tree_path, "tree"))
    attacker = load_attacker(_read(cfg.attacker_path, "attacker"))
    validate_attacker_for(attacker, tree.dimension)
    dataset = load_dataset(
        _read(cfg.data_path, "dataset"),
        label_column=cfg.label_column,
        feature_names=tree.feature_names,
        labels=tree.labels,
    )
    for i, (x, _) in enumerate(dataset.rows):
        if len(x) != tree.dimension:
            raise ValidationError(
                f"dataset row {i}: {len(x)} features, tree expects {tree.dimension}"
            )

    tree_program = encode_tree(tree)
    attacker_program = encode_attacker(attacker, tree.dimension)
    if cfg.dump_ir:
        print(format_attacker_program(attacker_program))
        print(format_tree_program(tree_program))

    started = time.perf_counter()
    log.info("computing attacker summary")
    shared = attacker_summary(attacker_program, cfg.widening_delay)
    if cfg.dump_summary:
        print(format_poly(shared.invariant))

    ctx = {
        "tree": tree,
        "tree_program": tree_program,
        "attacker_program": attacker_program,
        "summary": shared,
        "per_instance": cfg.per_instance_summary,
        "widening_delay": cfg.widening_delay,
    }
    items = list(enumerate(dataset.rows))
    log.info("classifying %d rows", len(items))
    rows = _map_rows(_analyze_row, items, cfg.jobs, ctx)
    analysis_seconds = time.perf_counter() - started

    oracle_loss = None
    oracle_exhaustive = None
    oracle_exact = None
    counts = None
    oracle_seconds = None
    if cfg.mode == "compare":
        started = time.perf_counter()
        log.info("running enumeration oracle")
        oracle_ctx = {
            "tree": tree,
            "attacker": attacker,
            "oracle_max_states": cfg.oracle_max_states,
        }
        results = _map_rows(_oracle_row, items, cfg.jobs, oracle_ctx)
        oracle_seconds = time.perf_counter() - started
        rows = [
            RowReport(
                index=row.index,
                label=row.label,
                predicted=row.predicted,
                verdict=row.verdict,
                reachable=row.reachable,
                oracle=result,
            )
            for row, result in zip(rows, results)
        ]
        for row in rows:
            certified = row.verdict is Verdict.CERTIFIED_ROBUST
            if certified and row.oracle.found_attack(row.label):
                raise SoundnessError(
                    f"row {row.index}: certified robust but the oracle found an attack"
                )
        oracle_loss = loss_under_attack(tree, dataset, attacker, results=results)
        oracle_exhaustive = all(r.exhaustive for r in results)
        oracle_exact = all(r.exact_mode for r in results)
        counts = confusion(rows)

    config_echo = {
        "tree": cfg.tree_path,
        "attacker": cfg.attacker_path,
        "data": cfg.data_path,
        "label_column": cfg.label_column,
        "widening_delay": cfg.widening_delay,
        "per_instance_summary": cfg.per_instance_summary,
        "jobs": cfg.jobs,
    }
    if cfg.mode == "compare":
        config_echo["oracle_max_states"] = cfg.oracle_max_states

    timing = None
    if not cfg.no_timing:
        timing = {"analysis_seconds": analysis_seconds}
        if oracle_seconds is not None:
            timing["oracle_seconds"] = oracle_seconds

    return Report(
        mode=cfg.mode,
        config=config_echo,
        converged_without_widening=shared.converged_without_widening,
        iterations=shared.iterations,
        clean_loss=clean_loss(tree, dataset),
        approx_loss=approx_loss([row.verdict for row in rows]),
        rows=tuple(rows),
        oracle_loss=oracle_loss,
        oracle_exhaustive=oracle_exhaustive,
        oracle_exact_mode=oracle_exact,
        counts=counts,
        misclassified_clean=sum(
            1 for row in rows if row.verdict is Verdict.MISCLASSIFIED_CLEAN
        ),
        timing=timing,
    )


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("TREECERT_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.INFO))
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    try:
        report = run(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SoundnessError as exc:
        print(f"internal soundness error: {exc}", file=sys.stderr)
        return 3
    print(report.to_text(), end="")
    if cfg.out_json:
        with open(cfg.out_json, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
    if cfg.out_csv:
        with open(cfg.out_csv, "w", encoding="utf-8") as handle:
            handle.write(report.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
