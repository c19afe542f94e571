"""Events, histories and the projections the checkers are built on.

A history is a sequence of invocation/response events of container method
calls (insert, remove, data-observe).  Values are ``(core, version)`` pairs so
that every value is inserted and removed at most once; ``core`` is ``None``
for the distinguished ``empty`` answer of a remove.

Text format, one event per line::

    <index> <thread> <inv|res> <ins|rem|dob> <core|empty>:<version> [obj=<id>]

Lines must be sorted by index; ``#`` starts a comment line.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple


class HistoryError(ValueError):
    """Base class for history construction errors."""


class MalformedLine(HistoryError):
    pass


class DuplicateEvent(HistoryError):
    pass


class OrphanResponse(HistoryError):
    pass


class NotWellFormed(HistoryError):
    pass


class DuplicateValue(HistoryError):
    pass


class OrphanMethod(HistoryError):
    """A remove/observe returns a value that no thread inserted."""

    def __init__(self, message: str, calls: Sequence["MethodCall"] = ()) -> None:
        super().__init__(message)
        self.calls = tuple(calls)


@dataclass(frozen=True, order=True)
class Value:
    core: Optional[int]
    version: int = 0

    @property
    def is_empty(self) -> bool:
        return self.core is None

    def __str__(self) -> str:
        core = "empty" if self.core is None else str(self.core)
        return f"{core}:{self.version}"

    @classmethod
    def parse(cls, text: str) -> "Value":
        core, sep, version = text.partition(":")
        if not sep:
            raise ValueError(f"value {text!r} lacks a version")
        ver = int(version)
        if ver < 0:
            raise ValueError("negative version")
        if core == "empty":
            return cls(None, ver)
        return cls(int(core), ver)


def empty(version: int = 0) -> Value:
    return Value(None, version)


class Kind(enum.Enum):
    INS = "ins"
    REM = "rem"
    DOB = "dob"


class Phase(enum.Enum):
    INV = "inv"
    RES = "res"


@dataclass(frozen=True)
class MethodCall:
    id: int
    kind: Kind
    value: Value
    thread: int
    obj: int = 0

    def label(self) -> str:
        core = "empty" if self.value.core is None else self.value.core
        obj = f"q{self.obj}." if self.obj else ""
        return f"{obj}{self.kind.value}({core})"

    def __str__(self) -> str:
        return f"{self.label()}@T{self.thread}"


@dataclass(frozen=True)
class Event:
    call: MethodCall
    phase: Phase
    index: int

    @property
    def thread(self) -> int:
        return self.call.thread


# thread, phase, kind, value, obj
Record = Tuple[int, Phase, Kind, Value, int]


class History:
    """An immutable, well-formed history.

    ``calls`` is ordered by call id (= invocation order).  Projections keep
    call ids, so calls can be compared across a history and its projections.
    """

    __slots__ = ("events", "calls", "_inv", "_res", "_by_id")

    def __init__(self, events: Sequence[Event]) -> None:
        self.events: Tuple[Event, ...] = tuple(events)
        inv: Dict[int, int] = {}
        res: Dict[int, int] = {}
        by_id: Dict[int, MethodCall] = {}
        for ev in self.events:
            if ev.phase is Phase.INV:
                inv[ev.call.id] = ev.index
                by_id[ev.call.id] = ev.call
            else:
                res[ev.call.id] = ev.index
        self._inv = inv
        self._res = res
        self._by_id = by_id
        self.calls: Tuple[MethodCall, ...] = tuple(by_id[i] for i in sorted(by_id))

    # -- construction -----------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[Record], strict_values: bool = True) -> "History":
        """Build a history from ``(thread, phase, kind, value, obj)`` records.

        Responses are matched to the pending invocation of the same thread.
        With ``strict_values`` the value-uniqueness assumption is enforced;
        pass ``False`` to admit histories that a sanity check should flag
        (a value removed twice, say).
        """
        events: List[Event] = []
        pending: Dict[int, MethodCall] = {}
        seen: set = set()
        ins_seen: set = set()
        rem_seen: set = set()
        ids = itertools.count()
        for thread, phase, kind, value, obj in records:
            key = (thread, phase, kind, value, obj)
            if key in seen:
                raise DuplicateEvent(f"event {_fmt_record(key)} appears twice")
            seen.add(key)
            if kind is Kind.INS and value.is_empty:
                raise MalformedLine("an insert cannot carry the empty value")
            if kind is Kind.DOB and value.is_empty:
                raise MalformedLine("a data observation cannot return empty")
            if phase is Phase.INV:
                if thread in pending:
                    raise NotWellFormed(
                        f"thread {thread} invokes {kind.value}({value}) while "
                        f"{pending[thread].label()} is pending"
                    )
                if strict_values:
                    slot = ins_seen if kind is Kind.INS else rem_seen if kind is Kind.REM else None
                    if slot is not None:
                        vkey = (value, obj) if value.is_empty else value
                        if vkey in slot:
                            raise DuplicateValue(f"value {value} used by two {kind.value} calls")
                        slot.add(vkey)
                call = MethodCall(next(ids), kind, value, thread, obj)
                pending[thread] = call
                events.append(Event(call, Phase.INV, len(events)))
            else:
                call = pending.get(thread)
                if call is None:
                    raise OrphanResponse(f"response {_fmt_record(key)} has no pending invocation")
                if (call.kind, call.value, call.obj) != (kind, value, obj):
                    raise NotWellFormed(
                        f"response {_fmt_record(key)} does not match pending {call.label()}"
                    )
                del pending[thread]
                events.append(Event(call, Phase.RES, len(events)))
        return cls(events)

    @classmethod
    def sequential(cls, calls: Iterable[Tuple[int, str, object]], strict_values: bool = True) -> "History":
        """Sequential history from ``(thread, 'ins'|'rem'|'dob', core)`` triples.

        ``core`` may be an int, ``None``/``"empty"``, or a ready ``Value``.
        Empty removes receive fresh versions.
        """
        recs: List[Record] = []
        empties = itertools.count()
        for thread, kind, core in calls:
            value = _coerce_value(core, empties)
            k = Kind(kind)
            recs.append((thread, Phase.INV, k, value, 0))
            recs.append((thread, Phase.RES, k, value, 0))
        return cls.from_records(recs, strict_values=strict_values)

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return [(e.call, e.phase) for e in self.events] == [(e.call, e.phase) for e in other.events]

    def __hash__(self) -> int:
        return hash(tuple((e.call, e.phase) for e in self.events))

    def __repr__(self) -> str:
        return f"History({len(self.calls)} calls, threads={sorted(self.threads)})"

    @property
    def threads(self) -> frozenset:
        return frozenset(c.thread for c in self.calls)

    def call(self, call_id: int) -> MethodCall:
        return self._by_id[call_id]

    def inv(self, call: MethodCall) -> int:
        return self._inv[call.id]

    def res(self, call: MethodCall) -> Optional[int]:
        """Response index, or ``None`` for a pending call."""
        return self._res.get(call.id)

    def is_pending(self, call: MethodCall) -> bool:
        return call.id not in self._res

    @property
    def is_complete(self) -> bool:
        return len(self._res) == len(self._inv)

    @property
    def is_sequential(self) -> bool:
        evs = self.events
        if len(evs) % 2:
            return False
        return all(
            evs[i].phase is Phase.INV and evs[i + 1].phase is Phase.RES and evs[i].call is evs[i + 1].call
            for i in range(0, len(evs), 2)
        )

    def precedes(self, m: MethodCall, n: MethodCall) -> bool:
        r = self._res.get(m.id)
        return r is not None and r < self._inv[n.id]

    def objects(self) -> frozenset:
        return frozenset(c.obj for c in self.calls)

    def records(self) -> List[Record]:
        return [(e.thread, e.phase, e.call.kind, e.call.value, e.call.obj) for e in self.events]


def _coerce_value(core: object, empties: Iterator[int]) -> Value:
    if isinstance(core, Value):
        return core
    if core is None or core == "empty":
        return Value(None, next(empties))
    return Value(int(core), 0)  # type: ignore[call-overload]


def _fmt_record(rec: Record) -> str:
    thread, phase, kind, value, obj = rec
    suffix = f" obj={obj}" if obj else ""
    return f"{thread} {phase.value} {kind.value} {value}{suffix}"


# -- text format ---------------------------------------------------------------


def parse_history(text: str, strict_values: bool = True) -> History:
    records: List[Record] = []
    last_index = -1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise MalformedLine(f"line {lineno}: expected 5 or 6 fields, got {len(parts)}")
        try:
            index = int(parts[0])
            thread = int(parts[1])
            phase = Phase(parts[2])
            kind = Kind(parts[3])
            value = Value.parse(parts[4])
            obj = 0
            if len(parts) == 6:
                key, sep, oid = parts[5].partition("=")
                if key != "obj" or not sep:
                    raise ValueError(f"unknown field {parts[5]!r}")
                obj = int(oid)
        except ValueError as exc:
            raise MalformedLine(f"line {lineno}: {exc}") from None
        if index < 0:
            raise MalformedLine(f"line {lineno}: negative index")
        if index <= last_index:
            raise MalformedLine(f"line {lineno}: index {index} not increasing")
        last_index = index
        records.append((thread, phase, kind, value, obj))
    return History.from_records(records, strict_values=strict_values)


def serialize_history(h: History) -> str:
    lines = []
    for ev in h.events:
        c = ev.call
        suffix = f" obj={c.obj}" if c.obj else ""
        lines.append(f"{ev.index} {c.thread} {ev.phase.value} {c.kind.value} {c.value}{suffix}")
    return "\n".join(lines) + ("\n" if lines else "")


# -- order and projections -------------------------------------------------------


@dataclass(frozen=True)
class PrecedenceRelation:
    pairs: frozenset

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def restrict(self, ids: Iterable[int]) -> "PrecedenceRelation":
        keep = set(ids)
        return PrecedenceRelation(frozenset((a, b) for a, b in self.pairs if a in keep and b in keep))

    def is_total_on(self, ids: Sequence[int]) -> bool:
        return all((a, b) in self.pairs or (b, a) in self.pairs for a, b in itertools.combinations(ids, 2))


def precedence(h: History) -> PrecedenceRelation:
    """Pairs of call ids ``(m, n)`` such that m responds before n is invoked."""
    pairs = set()
    calls = h.calls
    for m in calls:
        r = h.res(m)
        if r is None:
            continue
        for n in calls:
            if r < h.inv(n):
                pairs.add((m.id, n.id))
    return PrecedenceRelation(frozenset(pairs))


def program_order(h: History) -> PrecedenceRelation:
    """Precedence restricted to pairs of calls of the same thread."""
    pairs = set()
    by_thread: Dict[int, List[MethodCall]] = {}
    for c in h.calls:
        by_thread.setdefault(c.thread, []).append(c)
    for seq in by_thread.values():
        for i, m in enumerate(seq):
            for n in seq[i + 1:]:
                pairs.add((m.id, n.id))
    return PrecedenceRelation(frozenset(pairs))


def project(h: History, keep: Callable[[MethodCall], bool]) -> History:
    events = []
    for ev in h.events:
        if keep(ev.call):
            events.append(Event(ev.call, ev.phase, len(events)))
    return History(events)


def project_calls(h: History, ids: Iterable[int]) -> History:
    # gather event positions directly; cheap for small windows of long runs
    positions = []
    for i in set(ids):
        positions.append(h._inv[i])
        r = h._res.get(i)
        if r is not None:
            positions.append(r)
    positions.sort()
    return History([Event(h.events[j].call, h.events[j].phase, n) for n, j in enumerate(positions)])


def project_object(h: History, obj: int) -> History:
    return project(h, lambda c: c.obj == obj)


def completions(h: History) -> Iterator[History]:
    """Every completion under the fixed policy: pending removes and observes
    are dropped; each pending insert is either dropped or responded at the end.
    """
    pending = [c for c in h.calls if h.is_pending(c)]
    inserts = [c for c in pending if c.kind is Kind.INS]
    dropped_always = {c.id for c in pending if c.kind is not Kind.INS}
    for choice in itertools.product((False, True), repeat=len(inserts)):
        completed = [c for c, keep in zip(inserts, choice) if keep]
        drop = dropped_always | {c.id for c, keep in zip(inserts, choice) if not keep}
        events: List[Event] = []
        for ev in h.events:
            if ev.call.id not in drop:
                events.append(Event(ev.call, ev.phase, len(events)))
        for c in completed:
            events.append(Event(c, Phase.RES, len(events)))
        yield History(events)


# -- thread-induced decomposition -----------------------------------------------


def inserted_by(h: History) -> Dict[Value, int]:
    """Map each inserted value to its inserting thread."""
    return {c.value: c.thread for c in h.calls if c.kind is Kind.INS}


def _induced_predicate(owner: Mapping[Value, int], thread: int) -> Callable[[MethodCall], bool]:
    def keep(c: MethodCall) -> bool:
        if c.kind is Kind.INS:
            return c.thread == thread
        if c.value.is_empty:
            # empty removes belong to every thread; empty observes are not modelled
            return c.kind is Kind.REM
        return owner.get(c.value) == thread

    return keep


def thread_induced(h: History, thread: int) -> History:
    return project(h, _induced_predicate(inserted_by(h), thread))


def decompose(h: History) -> Dict[int, History]:
    owner = inserted_by(h)
    # a pending remove has no answer yet and every completion drops it
    orphans = [
        c for c in h.calls
        if c.kind is not Kind.INS and not (c.kind is Kind.REM and c.value.is_empty)
        and c.value not in owner and not h.is_pending(c)
    ]
    if orphans:
        names = ", ".join(str(c) for c in orphans[:5])
        raise OrphanMethod(f"{len(orphans)} call(s) in no thread-induced history: {names}", orphans)
    return {t: project(h, _induced_predicate(owner, t)) for t in sorted(h.threads)}
