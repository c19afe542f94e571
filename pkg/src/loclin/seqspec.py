"""Sequential specifications of pool, queue and stack.

Two independent views of each specification live here:

* ``valid_sequence`` evaluates the axioms directly over a whole call
  sequence with a quadratic scan;
* ``simulator_step`` is the incremental automaton the search-based checkers
  prune with.

They are cross-checked against each other exhaustively in the tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .history import Kind, MethodCall, Value


class SeqSpecKind(enum.Enum):
    POOL = "pool"
    QUEUE = "queue"
    STACK = "stack"
    NEARLYQ = "nearlyq"


# NearlyQ modes: only empties so far / one insert / two inserts, swap pending / plain FIFO
START, ONE, ARMED, FIFO = 0, 1, 2, 3


class Reject(Exception):
    """The extension leaves the specification."""


@dataclass(frozen=True)
class SimulatorState:
    kind: SeqSpecKind
    contents: Tuple[Value, ...] = ()
    mode: int = START

    @classmethod
    def initial(cls, kind: SeqSpecKind) -> "SimulatorState":
        return cls(kind, (), START)


def try_step(state: SimulatorState, kind: Kind, value: Value) -> Optional[SimulatorState]:
    """``simulator_step`` without the exception, for the search hot path."""
    spec = state.kind
    contents = state.contents
    if kind is Kind.INS:
        if value.is_empty or value in contents:
            return None
        if spec is SeqSpecKind.POOL:
            return SimulatorState(spec, tuple(sorted(contents + (value,))), START)
        mode = state.mode
        if spec is SeqSpecKind.NEARLYQ:
            mode = ONE if mode == START else ARMED if mode == ONE else mode
        return SimulatorState(spec, contents + (value,), mode)
    if kind is Kind.DOB:
        return state if value in contents else None
    # remove
    if value.is_empty:
        return state if not contents else None
    if spec is SeqSpecKind.POOL:
        if value not in contents:
            return None
        return SimulatorState(spec, tuple(v for v in contents if v != value), START)
    if spec is SeqSpecKind.STACK:
        if not contents or contents[-1] != value:
            return None
        return SimulatorState(spec, contents[:-1], START)
    if spec is SeqSpecKind.QUEUE:
        if not contents or contents[0] != value:
            return None
        return SimulatorState(spec, contents[1:], START)
    # NearlyQ
    if state.mode == ARMED:
        if len(contents) < 2 or contents[1] != value:
            return None
        return SimulatorState(spec, contents[:1] + contents[2:], FIFO)
    if not contents or contents[0] != value:
        return None
    return SimulatorState(spec, contents[1:], FIFO)


def simulator_step(state: SimulatorState, call: MethodCall) -> SimulatorState:
    nxt = try_step(state, call.kind, call.value)
    if nxt is None:
        raise Reject(f"{call.label()} leaves {state.kind.value} in state {list(map(str, state.contents))}")
    return nxt


def run_simulator(calls: Iterable[MethodCall], kind: SeqSpecKind) -> bool:
    state = SimulatorState.initial(kind)
    for c in calls:
        nxt = try_step(state, c.kind, c.value)
        if nxt is None:
            return False
        state = nxt
    return True


# -- axiomatic membership --------------------------------------------------------


def _pool_axioms(seq: Sequence[MethodCall]) -> bool:
    ins: Dict[Value, int] = {}
    rem: Dict[Value, int] = {}
    for i, c in enumerate(seq):
        if c.kind is Kind.INS:
            if c.value.is_empty or c.value in ins:
                return False
            ins[c.value] = i
        elif c.kind is Kind.REM and not c.value.is_empty:
            if c.value in rem:
                return False
            rem[c.value] = i
    for i, c in enumerate(seq):
        if c.value.is_empty:
            continue
        if c.kind is Kind.REM and not ins.get(c.value, i) < i:
            return False
        if c.kind is Kind.DOB:
            if not ins.get(c.value, i) < i or rem.get(c.value, i) < i:
                return False
    # an element inserted before an empty answer was removed before it
    for j, c in enumerate(seq):
        if c.kind is Kind.REM and c.value.is_empty:
            for x, i in ins.items():
                if i < j and not (x in rem and i < rem[x] < j):
                    return False
    return True


def _queue_order(seq: Sequence[MethodCall]) -> bool:
    ins = {c.value: i for i, c in enumerate(seq) if c.kind is Kind.INS}
    rem = {c.value: i for i, c in enumerate(seq) if c.kind is Kind.REM and not c.value.is_empty}
    for x, ix in ins.items():
        for y, iy in ins.items():
            if ix < iy and y in rem:
                if x not in rem or rem[x] > rem[y]:
                    return False
    return True


def _stack_order(seq: Sequence[MethodCall]) -> bool:
    ins = {c.value: i for i, c in enumerate(seq) if c.kind is Kind.INS}
    rem = {c.value: i for i, c in enumerate(seq) if c.kind is Kind.REM and not c.value.is_empty}
    for x, ix in ins.items():
        if x not in rem:
            continue
        for y, iy in ins.items():
            if ix < iy < rem[x]:
                if y not in rem or rem[y] > rem[x]:
                    return False
    return True


def _swapped_start(seq: Sequence[MethodCall]) -> Optional[Tuple[Value, Value]]:
    """The pair (a, b) when ``seq`` is empties, then ins(a) ins(b)."""
    i = 0
    while i < len(seq) and seq[i].kind is Kind.REM and seq[i].value.is_empty:
        i += 1
    if i + 1 < len(seq) and seq[i].kind is Kind.INS and seq[i + 1].kind is Kind.INS:
        return seq[i].value, seq[i + 1].value
    return None


def _nearlyq(seq: Sequence[MethodCall]) -> bool:
    pair = _swapped_start(seq)
    if pair is None:
        return _pool_axioms(seq) and _queue_order(seq)
    a, b = pair
    seen_b = False
    renamed: List[MethodCall] = []
    for c in seq:
        if c.kind is Kind.REM and c.value == b:
            seen_b = True
            c = MethodCall(c.id, c.kind, a, c.thread, c.obj)
        elif c.kind is Kind.REM and c.value == a:
            if not seen_b:
                return False
            c = MethodCall(c.id, c.kind, b, c.thread, c.obj)
        renamed.append(c)
    return _pool_axioms(renamed) and _queue_order(renamed)


def valid_sequence(seq: Sequence[MethodCall], kind: SeqSpecKind) -> bool:
    seq = list(seq)
    if kind is SeqSpecKind.NEARLYQ:
        return _nearlyq(seq)
    if not _pool_axioms(seq):
        return False
    if kind is SeqSpecKind.QUEUE:
        return _queue_order(seq)
    if kind is SeqSpecKind.STACK:
        return _stack_order(seq)
    return True


def data_project(seq: Sequence[MethodCall], keep_values: Iterable[int]) -> List[MethodCall]:
    keep = set(keep_values)
    return [c for c in seq if c.value.is_empty or c.value.core in keep]
