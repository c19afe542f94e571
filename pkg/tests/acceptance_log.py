"""One result line per acceptance criterion, printed again at session end."""

from __future__ import annotations

from typing import List, Tuple

LINES: List[Tuple[str, str]] = []


def report(criterion: int, ok: bool, detail: str, informational: bool = False) -> str:
    status = "PASS" if ok else ("UNMET" if informational else "FAIL")
    line = f"criterion {criterion}: {status} - {detail}"
    LINES.append((f"{criterion:02d}", line))
    print(line, flush=True)
    return line
