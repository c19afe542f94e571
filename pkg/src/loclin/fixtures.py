"""Bundled corpus of small histories with expected verdicts.

Each fixture is drawn as call intervals on a time line; ``INTERVALS`` is the
source and the ``.hist`` files under ``fixtures/`` are generated from it
(``python -m loclin.fixtures --regenerate``).  ``manifest.json`` lists, per
fixture, the expected verdict for each (condition, spec) pair.
"""

from __future__ import annotations

import argparse
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .checkers import BoundExceeded, run_condition
from .history import History, HistoryError, Kind, Phase, Value, parse_history, serialize_history
from .seqspec import SeqSpecKind

CORPUS_DIR = Path(__file__).with_name("fixtures")

E = None  # an empty answer in the tables below

# (thread, kind, core, inv time, res time); empties get fresh versions
Interval = Tuple[int, str, Optional[int], float, float]

SC_NOT_LL: List[Interval] = [(1, "ins", 1, 1, 1.75), (1, "rem", 1, 4, 4.75), (2, "rem", E, 2, 3.75)]

INTERVALS: Dict[str, List[Interval]] = {
    "ll-not-lin": [(1, "ins", 1, 1, 2), (2, "ins", 2, 2.5, 3.5), (1, "rem", 2, 4, 5), (2, "rem", 1, 5.5, 6.5)],
    "lin-overlap": [(1, "ins", 2, 1, 3), (2, "ins", 1, 2, 5), (1, "rem", 1, 4, 6)],
    "ll-not-sc": [
        (1, "ins", 1, 1, 1.75), (1, "rem", E, 2, 4.25), (2, "ins", 2, 2.25, 3),
        (2, "rem", 1, 3.25, 4), (1, "rem", 2, 4.5, 5.25),
    ],
    "sc-not-ll-empty": SC_NOT_LL,
    "nearlyq-lin-not-ll": [
        (1, "ins", 1, 0.85, 1.85), (2, "ins", 3, 2.1, 3.1), (1, "ins", 2, 3.35, 4.35),
        (1, "rem", 3, 4.6, 5.6), (2, "rem", 1, 5.85, 6.85), (1, "rem", 2, 7.1, 8.1),
    ],
    "sc-not-ll": SC_NOT_LL,
    "sc-not-ll-queue": [(2, "ins", 1, 1, 1.75), (2, "ins", 2, 2, 2.75), (1, "rem", 2, 3, 3.75), (2, "rem", 1, 4, 4.75)],
    "sc-not-ll-stack": [(1, "ins", 1, 1, 1.75), (1, "ins", 2, 2, 2.75), (2, "rem", 1, 3, 3.75), (2, "rem", 2, 4, 4.75)],
    "ll-not-sc-queue": [
        (1, "ins", 1, 1, 1.75), (1, "ins", 2, 2, 2.75), (1, "ins", 3, 3, 3.75), (1, "rem", 1, 4, 4.75),
        (2, "rem", 2, 5, 5.75), (2, "ins", 4, 6, 6.75), (2, "rem", 4, 7, 7.75), (2, "rem", 3, 8, 8.75),
    ],
    "ll-not-sc-stack": [
        (1, "ins", 1, 1, 1.75), (1, "ins", 2, 2, 2.75), (2, "rem", 2, 3, 3.75),
        (2, "ins", 3, 4, 4.75), (2, "rem", 1, 5, 5.75), (2, "rem", 3, 6, 6.75),
    ],
    "qc-not-ll": [(1, "rem", E, 1, 6.75), (2, "ins", 1, 1.25, 2.5), (2, "rem", E, 2.75, 5), (2, "rem", 1, 5.25, 6.5)],
    "qc-not-ll-queue": [
        (1, "ins", 1, 1, 7.25), (2, "ins", 2, 1.25, 2.5), (2, "ins", 3, 2.75, 4),
        (2, "rem", 3, 4.25, 5.5), (2, "rem", 2, 5.75, 7),
    ],
    "qc-not-ll-stack": [
        (1, "ins", 1, 1, 7.25), (2, "ins", 2, 1.25, 2.5), (2, "ins", 3, 2.75, 4),
        (2, "rem", 2, 4.25, 5.5), (2, "rem", 3, 5.75, 7),
    ],
    "ll-not-qc-queue": [(1, "ins", 1, 1, 2.25), (2, "ins", 2, 2.5, 3.75), (1, "rem", 2, 4, 5.25), (2, "rem", 1, 5.5, 6.75)],
    "ll-not-qc-stack": [(1, "ins", 1, 1, 2.25), (2, "ins", 2, 2.5, 3.75), (1, "rem", 1, 4, 5.25), (2, "rem", 2, 5.5, 6.75)],
}


def history_from_intervals(intervals: Sequence[Interval], strict_values: bool = True) -> History:
    """Lay out call intervals as events; at equal times responses go first."""
    stamped = []
    empties = itertools.count()
    for thread, kind, core, start, end in intervals:
        if end <= start:
            raise ValueError(f"interval [{start}, {end}] is empty")
        value = Value(core, 0) if core is not None else Value(None, next(empties))
        k = Kind(kind)
        stamped.append((start, 1, thread, Phase.INV, k, value))
        stamped.append((end, 0, thread, Phase.RES, k, value))
    stamped.sort(key=lambda s: (s[0], s[1], s[2]))
    return History.from_records(((t, p, k, v, 0) for _, _, t, p, k, v in stamped), strict_values)


# -- corpus runner -----------------------------------------------------------------------


@dataclass(frozen=True)
class Expectation:
    fixture: str
    condition: str
    spec: Optional[str]
    verdict: str
    source: str = "cited"

    def key(self) -> str:
        spec = f"/{self.spec}" if self.spec else ""
        return f"{self.fixture}: {self.condition}{spec}"


@dataclass(frozen=True)
class Mismatch:
    expectation: Expectation
    actual: str

    def __str__(self) -> str:
        return f"{self.expectation.key()}: expected {self.expectation.verdict}, got {self.actual}"


class EmptyCorpus(Exception):
    pass


def load_manifest(corpus: Union[str, Path] = CORPUS_DIR) -> Tuple[Dict[str, str], List[Expectation]]:
    corpus = Path(corpus)
    manifest = corpus / "manifest.json"
    if not manifest.is_file():
        raise EmptyCorpus(f"no manifest.json in {corpus}")
    data = json.loads(manifest.read_text())
    files: Dict[str, str] = {}
    expectations: List[Expectation] = []
    for entry in data.get("fixtures", []):
        files[entry["name"]] = entry["file"]
        for exp in entry["expect"]:
            expectations.append(
                Expectation(entry["name"], exp["condition"], exp.get("spec"), exp["verdict"], exp.get("source", "cited"))
            )
    if not expectations:
        raise EmptyCorpus(f"manifest in {corpus} lists no expectations")
    return files, expectations


def run_fixtures(corpus: Union[str, Path] = CORPUS_DIR) -> Tuple[int, List[Mismatch]]:
    """Check every expectation; returns (number checked, mismatches)."""
    corpus = Path(corpus)
    files, expectations = load_manifest(corpus)
    histories: Dict[str, object] = {}
    for name, fname in files.items():
        path = corpus / fname
        try:
            histories[name] = parse_history(path.read_text(), strict_values=False)
        except (OSError, HistoryError) as exc:
            histories[name] = exc
    mismatches = []
    for exp in expectations:
        h = histories.get(exp.fixture)
        if not isinstance(h, History):
            mismatches.append(Mismatch(exp, f"unreadable ({h})"))
            continue
        spec = SeqSpecKind(exp.spec) if exp.spec else None
        try:
            actual = run_condition(h, exp.condition, spec).outcome.value
        except (BoundExceeded, HistoryError) as exc:
            actual = type(exc).__name__
        if actual != exp.verdict:
            mismatches.append(Mismatch(exp, actual))
    return len(expectations), mismatches


def regenerate(corpus: Union[str, Path] = CORPUS_DIR) -> None:
    corpus = Path(corpus)
    for name, intervals in INTERVALS.items():
        text = f"# fixture {name}\n" + serialize_history(history_from_intervals(intervals))
        (corpus / f"{name}.hist").write_text(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m loclin.fixtures")
    ap.add_argument("--regenerate", action="store_true", help="rewrite the .hist files from INTERVALS")
    args = ap.parse_args(argv)
    if args.regenerate:
        regenerate()
        return 0
    checked, bad = run_fixtures()
    for m in bad:
        print(m)
    print(f"{checked - len(bad)}/{checked} expectations match")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
