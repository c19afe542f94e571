"""Command line: ``loclin {bench,record,check,fixtures}``.

Exit codes
  check     0 Holds, 1 Violated, 2 unreadable history or search bound hit
  bench     0 ok, 2 invalid configuration, 3 runtime failure
  record    as bench, plus 1 when a window check or full-run check fails
  fixtures  0 all match, 1 mismatches (listed), 2 empty corpus
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .bench import (
    CSV_HEADER,
    STRUCTURES,
    WORKLOADS,
    ConfigInvalid,
    WorkloadConfig,
    run_workload,
    verify_run,
    write_history,
)
from .checkers import BoundExceeded, DEFAULT_BOUND, run_condition
from .fixtures import CORPUS_DIR, EmptyCorpus, run_fixtures
from .history import HistoryError, OrphanMethod, parse_history
from .seqspec import SeqSpecKind

CONDITIONS = ("lin", "loclin", "sc", "qc", "pool-sanity", "queue-lin-ax", "queue-loclin-ax")
SPECS = tuple(k.value for k in SeqSpecKind)


def _workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--structure", choices=STRUCTURES, default="ms")
    p.add_argument("--workload", choices=WORKLOADS, default="prodcon")
    p.add_argument("--k", type=int, default=4, help="segment size of k-FIFO / k-Stack")
    p.add_argument("--threads", type=int, default=2)
    p.add_argument("--ops", type=int, default=1000, help="operations (prodcon) or pairs (seqalt) per thread")
    p.add_argument("--delay-ns", type=int, default=5000, help="busy wait between a thread's operations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--switch-interval-us", type=float, default=None,
                   help="interpreter thread switch interval during the run (more interleaving when small)")
    p.add_argument("--window", type=int, default=None, metavar="VALUES",
                   help="check value-closed windows of this many values after the run")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loclin", description="Local linearizability toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a workload and print a CSV row")
    _workload_flags(b)
    b.add_argument("--record", metavar="PATH", default=None, help="also write the recorded history here")
    b.add_argument("--header", action="store_true", help="print the CSV header first")

    r = sub.add_parser("record", help="run a workload, write its history and check it")
    _workload_flags(r)
    r.add_argument("--record", metavar="PATH", required=True)

    c = sub.add_parser("check", help="check a history file")
    c.add_argument("path")
    c.add_argument("--condition", choices=CONDITIONS, required=True)
    c.add_argument("--spec", choices=SPECS, default=None)
    c.add_argument("--bound", type=int, default=DEFAULT_BOUND, help="maximum calls for exhaustive search")

    f = sub.add_parser("fixtures", help="run the bundled fixture corpus")
    f.add_argument("--dir", default=str(CORPUS_DIR), help="corpus directory with manifest.json")
    return ap


def _config(args: argparse.Namespace, record: bool) -> WorkloadConfig:
    return WorkloadConfig(
        structure=args.structure,
        workload=args.workload,
        k=args.k,
        threads=args.threads,
        ops=args.ops,
        delay_ns=args.delay_ns,
        seed=args.seed,
        record=record,
        switch_interval_s=None if args.switch_interval_us is None else args.switch_interval_us * 1e-6,
        audit=args.structure.startswith("ll-"),
    )


def _run(args: argparse.Namespace, record_path: Optional[str], out) -> int:
    try:
        cfg = _config(args, record_path is not None)
        cfg.validate()
        if args.window is not None and args.window < 1:
            raise ConfigInvalid("--window must be at least 1")
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_workload(cfg)
        if record_path is not None:
            write_history(report, record_path)
    except Exception as exc:  # runtime failures map to exit 3
        print(f"error: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if getattr(args, "header", False):
        print(CSV_HEADER, file=out)
    print(report.csv_row(), file=out)
    if not report.conserved:
        print(f"error: conservation broken: inserted {report.inserted} != removed {report.removed} "
              f"+ residue {report.residue}", file=sys.stderr)
        return 3
    for note in report.notes:
        print(f"# note: {note}", file=out)
    status = 0
    if report.audit_repeats:
        print(f"# audit: {len(report.audit_repeats)} repeated (thread, segment) inserts", file=out)
        status = 1
    if report.history is not None and (args.window is not None or args.command == "record"):
        rep = verify_run(report.history, cfg.structure, cfg.k, values_per_window=args.window)
        for line in rep.summary().splitlines():
            print(f"# {line}", file=out)
        if not rep.ok:
            status = 1
    return status


def cmd_bench(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    return _run(args, args.record, out)


def cmd_record(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    return _run(args, args.record, out)


def cmd_check(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    try:
        text = Path(args.path).read_text()
    except OSError as exc:
        print(f"error: cannot read {args.path}: {exc.strerror or exc}", file=sys.stderr)
        return 2
    try:
        h = parse_history(text, strict_values=args.condition != "pool-sanity")
    except HistoryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    needs_spec = args.condition in ("lin", "loclin", "sc", "qc")
    if needs_spec and args.spec is None:
        print(f"error: --spec is required for {args.condition}", file=sys.stderr)
        return 2
    spec = SeqSpecKind(args.spec) if args.spec else None
    try:
        verdict = run_condition(h, args.condition, spec, bound=args.bound)
    except BoundExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OrphanMethod as exc:
        print("Violated", file=out)
        print(f"violation: orphan method, no thread-induced history contains it: {exc}", file=out)
        return 1
    print(verdict.describe(), file=out)
    return 0 if verdict.holds else 1


def cmd_fixtures(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    try:
        checked, mismatches = run_fixtures(args.dir)
    except EmptyCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for m in mismatches:
        print(f"MISMATCH {m}", file=out)
    print(f"{checked - len(mismatches)}/{checked} fixture expectations match", file=out)
    return 1 if mismatches else 0


COMMANDS = {"bench": cmd_bench, "record": cmd_record, "check": cmd_check, "fixtures": cmd_fixtures}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
