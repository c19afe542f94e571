"""Decision procedures for linearizability and its relatives.

All search-based checkers share one engine: a depth-first search over the
set of calls already placed in the witness (a bitmask), where a call may be
placed once every call it is ordered after has been placed, and the spec
simulator must accept it.  Failed ``(placed, state)`` pairs are memoized.
The conditions differ only in which calls each call is ordered after:

* linearizability: calls that respond before it is invoked;
* sequential consistency: earlier calls of its own thread;
* quiescent consistency: calls of earlier quiescence-delimited blocks.

Pending removes are dropped.  Pending inserts are optional: the search may
place them (completed at the end) or leave them out (dropped).
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .history import History, Kind, MethodCall, OrphanMethod, Phase, completions, decompose
from .seqspec import SeqSpecKind, SimulatorState, try_step

DEFAULT_BOUND = 20


class BoundExceeded(Exception):
    def __init__(self, calls: int, bound: int) -> None:
        super().__init__(f"{calls} calls exceed the search bound of {bound}")
        self.calls = calls
        self.bound = bound


class Outcome(enum.Enum):
    HOLDS = "Holds"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class Violation:
    clause: str
    calls: Tuple[MethodCall, ...] = ()
    thread: Optional[int] = None
    detail: str = ""

    def __str__(self) -> str:
        where = f" (thread {self.thread})" if self.thread is not None else ""
        calls = ", ".join(str(c) for c in self.calls)
        text = f"{self.clause}{where}"
        if calls:
            text += f": {calls}"
        if self.detail:
            text += f" [{self.detail}]"
        return text


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    witness: Optional[Tuple[MethodCall, ...]] = None
    violation: Optional[Violation] = None
    # per-thread witnesses of a local linearizability check
    witnesses: Mapping[int, Tuple[MethodCall, ...]] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.outcome is Outcome.HOLDS

    def __bool__(self) -> bool:
        return self.holds

    def describe(self) -> str:
        lines = [self.outcome.value]
        if self.violation is not None:
            lines.append(f"violation: {self.violation}")
        if self.witness is not None:
            lines.append("witness: " + " ".join(c.label() for c in self.witness))
        for t, w in sorted(self.witnesses.items()):
            lines.append(f"witness T{t}: " + " ".join(c.label() for c in w))
        return "\n".join(lines)


def _holds(witness: Optional[Sequence[MethodCall]] = None, **kw) -> Verdict:
    return Verdict(Outcome.HOLDS, tuple(witness) if witness is not None else None, **kw)


def _violated(clause: str, calls: Iterable[MethodCall] = (), thread: Optional[int] = None, detail: str = "") -> Verdict:
    return Verdict(Outcome.VIOLATED, violation=Violation(clause, tuple(calls), thread, detail))


# -- search engine ---------------------------------------------------------------


def _search(
    calls: Sequence[MethodCall],
    preds: Sequence[int],
    optional: int,
    spec: SeqSpecKind,
) -> Optional[List[MethodCall]]:
    n = len(calls)
    required = ((1 << n) - 1) & ~optional
    objs = sorted({c.obj for c in calls})
    slot = {o: i for i, o in enumerate(objs)}
    where = [slot[c.obj] for c in calls]
    init = tuple(SimulatorState.initial(spec) for _ in objs)
    failed: set = set()
    order: List[int] = []

    def dfs(mask: int, states: tuple) -> bool:
        if mask & required == required:
            return True
        key = (mask, states)
        if key in failed:
            return False
        for i in range(n):
            bit = 1 << i
            if mask & bit or preds[i] & ~mask:
                continue
            c = calls[i]
            k = where[i]
            nxt = try_step(states[k], c.kind, c.value)
            if nxt is None:
                continue
            order.append(i)
            if dfs(mask | bit, states[:k] + (nxt,) + states[k + 1:]):
                return True
            order.pop()
        failed.add(key)
        return False

    if dfs(0, init):
        return [calls[i] for i in order]
    return None


def _live_calls(h: History) -> Tuple[List[MethodCall], int]:
    """Calls that take part in the search, and the mask of optional ones."""
    calls = [c for c in h.calls if not (h.is_pending(c) and c.kind is not Kind.INS)]
    optional = 0
    for i, c in enumerate(calls):
        if h.is_pending(c):
            optional |= 1 << i
    return calls, optional


def _check_bound(h: History, bound: int) -> None:
    if len(h.calls) > bound:
        raise BoundExceeded(len(h.calls), bound)


# -- linearizability and friends ------------------------------------------------------


def check_linearizable(h: History, kind: SeqSpecKind, bound: int = DEFAULT_BOUND) -> Verdict:
    _check_bound(h, bound)
    calls, optional = _live_calls(h)
    preds = []
    for n in calls:
        inv = h.inv(n)
        mask = 0
        for j, m in enumerate(calls):
            r = h.res(m)
            if r is not None and r < inv:
                mask |= 1 << j
        preds.append(mask)
    witness = _search(calls, preds, optional, kind)
    if witness is None:
        return _violated("not linearizable", calls, detail=kind.value)
    return _holds(witness)


def check_locally_linearizable(h: History, kind: SeqSpecKind, bound: int = DEFAULT_BOUND) -> Verdict:
    """Every thread-induced history must be linearizable.

    Raises ``OrphanMethod`` when the induced histories miss a call.
    """
    parts = decompose(h)
    for sub in parts.values():
        _check_bound(sub, bound)
    witnesses: Dict[int, Tuple[MethodCall, ...]] = {}
    seen: Dict[Tuple[int, ...], Verdict] = {}  # threads without inserts share one induced history
    for t, sub in parts.items():
        key = tuple(c.id for c in sub.calls)
        v = seen.get(key)
        if v is None:
            v = seen[key] = check_linearizable(sub, kind, bound)
        if not v.holds:
            return _violated("induced history not linearizable", sub.calls, thread=t, detail=kind.value)
        witnesses[t] = v.witness or ()
    return _holds(witnesses=witnesses)


def check_sequentially_consistent(h: History, kind: SeqSpecKind, bound: int = DEFAULT_BOUND) -> Verdict:
    _check_bound(h, bound)
    calls, optional = _live_calls(h)
    preds = []
    last: Dict[int, int] = {}
    for i, c in enumerate(calls):
        prev = last.get(c.thread)
        preds.append(0 if prev is None else preds[prev] | (1 << prev))
        last[c.thread] = i
    witness = _search(calls, preds, optional, kind)
    if witness is None:
        return _violated("no witness respects program order", calls, detail=kind.value)
    return _holds(witness)


def quiescent_blocks(h: History) -> Dict[int, int]:
    """Block number of every call; a new block starts at each invocation made
    while no call is pending (after at least one call)."""
    blocks: Dict[int, int] = {}
    block = 0
    pending = 0
    started = False
    for ev in h.events:
        if ev.phase is Phase.INV:
            if pending == 0 and started:
                block += 1
            started = True
            pending += 1
            blocks[ev.call.id] = block
        else:
            pending -= 1
    return blocks


def check_quiescently_consistent(h: History, kind: SeqSpecKind, bound: int = DEFAULT_BOUND) -> Verdict:
    _check_bound(h, bound)
    for comp in completions(h):
        blocks = quiescent_blocks(comp)
        calls = list(comp.calls)
        preds = []
        for c in calls:
            b = blocks[c.id]
            mask = 0
            for j, m in enumerate(calls):
                if blocks[m.id] < b:
                    mask |= 1 << j
            preds.append(mask)
        witness = _search(calls, preds, 0, kind)
        if witness is not None:
            return _holds(witness)
    return _violated("no witness respects quiescent order", h.calls, detail=kind.value)


# -- pool sanity -----------------------------------------------------------------------


def check_pool_sanity(h: History) -> Verdict:
    """Duplication, thin-air and lost-value clauses, in O(n log n)."""
    inserts: Dict[object, List[MethodCall]] = {}
    removes: Dict[object, List[MethodCall]] = {}
    empties: List[MethodCall] = []
    for c in h.calls:
        if c.kind is Kind.INS:
            inserts.setdefault(c.value, []).append(c)
        elif c.kind is Kind.REM and not h.is_pending(c):  # a pending remove has no answer yet
            if c.value.is_empty:
                empties.append(c)
            else:
                removes.setdefault(c.value, []).append(c)

    for value, rems in removes.items():
        if len(rems) > 1:
            return _violated("duplicated value", rems)

    for value, rems in removes.items():
        r = rems[0]
        ins = inserts.get(value)
        if not ins:
            return _violated("out-of-thin-air value", [r], detail="never inserted")
        if all(h.precedes(r, i) for i in ins):
            return _violated("out-of-thin-air value", [r, ins[0]], detail="removed before inserted")

    if empties:
        empties.sort(key=h.inv)
        invs = [h.inv(e) for e in empties]
        inf = len(h.events) + 1
        # suffix minimum of response positions, with the empty that attains it
        best: List[Tuple[int, int]] = [(inf, -1)] * (len(empties) + 1)
        for i in range(len(empties) - 1, -1, -1):
            r = h.res(empties[i])
            cand = (inf if r is None else r, i)
            best[i] = min(best[i + 1], cand)
        for value, ins_calls in inserts.items():
            for ins in ins_calls:
                r = h.res(ins)
                if r is None:
                    continue
                start = bisect.bisect_right(invs, r)
                if start == len(empties):
                    continue
                rems = removes.get(value)
                if not rems:
                    return _violated("lost value", [ins, empties[start]], detail="never removed after an empty answer")
                latest = max(h.inv(x) for x in rems)
                res_min, idx = best[start]
                if res_min < latest:
                    return _violated("lost value", [ins, empties[idx], rems[0]], detail="empty answer while present")
    return _holds()


# -- axiomatic queue checkers -------------------------------------------------------------


def _queue_order_clause(h: History, per_thread: bool) -> Optional[Violation]:
    enqs = [c for c in h.calls if c.kind is Kind.INS]
    deqs: Dict[object, MethodCall] = {}
    for c in h.calls:
        if c.kind is Kind.REM and not c.value.is_empty:
            deqs.setdefault(c.value, c)
    for x in enqs:
        for y in enqs:
            if per_thread:
                if x.thread != y.thread or x.id >= y.id:
                    continue
            elif not h.precedes(x, y):
                continue
            dy = deqs.get(y.value)
            if dy is None:
                continue
            dx = deqs.get(x.value)
            if dx is None:
                return Violation("queue order", (x, y, dy), x.thread if per_thread else None,
                                 "later value removed, earlier never")
            if h.precedes(dy, dx):
                return Violation("queue order", (x, y, dy, dx), x.thread if per_thread else None,
                                 "later value removed first")
    return None


def check_queue_lin_axiomatic(h: History, bound: int = DEFAULT_BOUND) -> Verdict:
    pool = check_linearizable(h, SeqSpecKind.POOL, bound)
    if not pool.holds:
        return _violated("not linearizable wrt pool", pool.violation.calls if pool.violation else ())
    bad = _queue_order_clause(h, per_thread=False)
    if bad is not None:
        return Verdict(Outcome.VIOLATED, violation=bad)
    return _holds()


def check_queue_loclin_axiomatic(h: History, bound: int = DEFAULT_BOUND) -> Verdict:
    pool = check_locally_linearizable(h, SeqSpecKind.POOL, bound)
    if not pool.holds:
        v = pool.violation
        return _violated("not locally linearizable wrt pool", v.calls if v else (), v.thread if v else None)
    bad = _queue_order_clause(h, per_thread=True)
    if bad is not None:
        return Verdict(Outcome.VIOLATED, violation=bad)
    return _holds()


def check_queue_loclin_order(h: History) -> Verdict:
    """Per-thread queue order clause alone, in linear time.

    Meant for full recorded runs, where the pool part is checked on windows.
    Walking a thread's enqueues in order, ``y`` is fine iff its dequeue
    responds no earlier than the latest dequeue invocation among values the
    thread enqueued before ``y``.
    """
    deqs: Dict[object, MethodCall] = {}
    for c in h.calls:
        if c.kind is Kind.REM and not c.value.is_empty:
            deqs.setdefault(c.value, c)
    inf = float("inf")
    state: Dict[int, Tuple[float, Optional[MethodCall]]] = {}
    for y in h.calls:
        if y.kind is not Kind.INS:
            continue
        top, arg = state.get(y.thread, (-1, None))
        dy = deqs.get(y.value)
        if dy is not None and arg is not None:
            ry = h.res(dy)
            if top == inf or (ry is not None and ry < top):
                dx = deqs.get(arg.value)
                calls = (arg, y, dy) + ((dx,) if dx is not None else ())
                return _violated("queue order", calls, y.thread)
        key = h.inv(dy) if dy is not None else inf
        if key > top:
            state[y.thread] = (key, y)
    return _holds()


# -- registry used by the CLI and fixture runner ----------------------------------------------

CONDITIONS: Dict[str, Callable[..., Verdict]] = {
    "lin": check_linearizable,
    "loclin": check_locally_linearizable,
    "sc": check_sequentially_consistent,
    "qc": check_quiescently_consistent,
}

SPEC_FREE = {
    "pool-sanity": check_pool_sanity,
    "queue-lin-ax": check_queue_lin_axiomatic,
    "queue-loclin-ax": check_queue_loclin_axiomatic,
}


def run_condition(h: History, condition: str, spec: Optional[SeqSpecKind] = None, bound: int = DEFAULT_BOUND) -> Verdict:
    if condition in CONDITIONS:
        if spec is None:
            raise ValueError(f"condition {condition!r} needs a spec")
        return CONDITIONS[condition](h, spec, bound=bound)
    if condition == "pool-sanity":
        return check_pool_sanity(h)
    if condition in SPEC_FREE:
        return SPEC_FREE[condition](h, bound=bound)
    raise ValueError(f"unknown condition {condition!r}")


__all__ = [
    "BoundExceeded", "CONDITIONS", "DEFAULT_BOUND", "Outcome", "OrphanMethod", "Verdict", "Violation",
    "check_linearizable", "check_locally_linearizable", "check_pool_sanity", "check_quiescently_consistent",
    "check_queue_lin_axiomatic", "check_queue_loclin_axiomatic", "check_queue_loclin_order",
    "check_sequentially_consistent", "quiescent_blocks", "run_condition",
]
