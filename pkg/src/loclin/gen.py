"""History generators for oracle comparisons.

``exhaustive`` enumerates complete histories of a given size.  Event orders
are canonical: inside any run of consecutive invocations (or responses) the
events are sorted by thread, since such swaps never change precedence; and
threads are numbered so that call counts are non-increasing.  Values are
canonical too (first use of a fresh value takes the next core), so every
history is produced once up to value renaming.

``random_history`` draws small histories, either by stretching a sequential
run of a spec into overlapping intervals (mostly linearizable) or with
uniformly random labels.
"""

from __future__ import annotations

import random
from typing import Iterator, List, Optional, Sequence, Tuple

from .history import Event, History, Kind, MethodCall, Phase, Value
from .seqspec import SeqSpecKind, SimulatorState, try_step

Skeleton = Tuple[Tuple[int, int], ...]  # (thread, 0 inv / 1 res)
Label = Tuple[Kind, Optional[int]]


def _partitions(n: int, max_threads: int) -> Iterator[Tuple[int, ...]]:
    def rec(left: int, cap: int, parts: int) -> Iterator[Tuple[int, ...]]:
        if left == 0:
            yield ()
            return
        if parts == 0:
            return
        for first in range(min(left, cap), 0, -1):
            for rest in rec(left - first, first, parts - 1):
                yield (first,) + rest
    return rec(n, n, max_threads)


def skeletons(n: int, max_threads: int = 3) -> Iterator[Skeleton]:
    """Canonical complete event orders with ``n`` calls."""
    for counts in _partitions(n, max_threads):
        k = len(counts)
        out: List[Tuple[int, int]] = []

        def rec(done: List[int], pending: List[bool], last_phase: int, last_thread: int) -> Iterator[Skeleton]:
            if len(out) == 2 * n:
                yield tuple(out)
                return
            for t in range(k):
                if pending[t]:
                    ph = 1
                elif done[t] < counts[t]:
                    ph = 0
                else:
                    continue
                if ph == last_phase and t < last_thread:
                    continue
                out.append((t, ph))
                if ph == 0:
                    pending[t] = True
                else:
                    pending[t] = False
                    done[t] += 1
                yield from rec(done, pending, ph, t)
                if ph == 0:
                    pending[t] = False
                else:
                    pending[t] = True
                    done[t] -= 1
                out.pop()

        yield from rec([0] * k, [False] * k, -1, -1)


def labelings(n: int, max_values: int = 3) -> Iterator[Tuple[Label, ...]]:
    """Call labels in invocation order: ins(v), rem(v) or rem(empty).

    Each value is inserted at most once and removed at most once; fresh
    values are numbered in order of first use.
    """
    out: List[Label] = []

    def rec(used: int, inserted: List[bool], removed: List[bool]) -> Iterator[Tuple[Label, ...]]:
        if len(out) == n:
            yield tuple(out)
            return
        out.append((Kind.REM, None))
        yield from rec(used, inserted, removed)
        out.pop()
        for v in range(used):
            for kind, flags in ((Kind.INS, inserted), (Kind.REM, removed)):
                if not flags[v]:
                    flags[v] = True
                    out.append((kind, v + 1))
                    yield from rec(used, inserted, removed)
                    out.pop()
                    flags[v] = False
        if used < max_values:
            for kind in (Kind.INS, Kind.REM):
                inserted.append(kind is Kind.INS)
                removed.append(kind is Kind.REM)
                out.append((kind, used + 1))
                yield from rec(used + 1, inserted, removed)
                out.pop()
                inserted.pop()
                removed.pop()

    yield from rec(0, [], [])


def build(skeleton: Skeleton, labels: Sequence[Label]) -> History:
    """Combine an event order with call labels (in invocation order)."""
    events: List[Event] = []
    open_call: dict = {}
    next_id = 0
    empties = 0
    for thread, phase in skeleton:
        if phase == 0:
            kind, core = labels[next_id]
            if core is None:
                value = Value(None, empties)
                empties += 1
            else:
                value = Value(core, 0)
            call = MethodCall(next_id, kind, value, thread)
            next_id += 1
            open_call[thread] = call
            events.append(Event(call, Phase.INV, len(events)))
        else:
            events.append(Event(open_call.pop(thread), Phase.RES, len(events)))
    return History(events)


def exhaustive(n: int, max_threads: int = 3, max_values: int = 3) -> Iterator[History]:
    labels = list(labelings(n, max_values))
    for sk in skeletons(n, max_threads):
        for lab in labels:
            yield build(sk, lab)


def count_exhaustive(n: int, max_threads: int = 3, max_values: int = 3) -> int:
    return sum(1 for _ in skeletons(n, max_threads)) * sum(1 for _ in labelings(n, max_values))


# -- random histories ---------------------------------------------------------------------


def _sequential_run(rng: random.Random, n: int, spec: SeqSpecKind, max_values: int) -> List[Label]:
    state = SimulatorState.initial(spec)
    labels: List[Label] = []
    fresh = 1
    for _ in range(n):
        options: List[Label] = []
        if fresh <= max_values:
            options.append((Kind.INS, fresh))
        for v in state.contents:
            if try_step(state, Kind.REM, v) is not None:
                options.append((Kind.REM, v.core))
        if not state.contents:
            options.append((Kind.REM, None))
        kind, core = rng.choice(options)
        value = Value(core, 0) if core is not None else Value(None, 0)
        state = try_step(state, kind, value)
        if kind is Kind.INS:
            fresh += 1
        labels.append((kind, core))
    return labels


def _random_labels(rng: random.Random, n: int, max_values: int) -> List[Label]:
    labels: List[Label] = []
    ins_left = list(range(1, max_values + 1))
    rem_left = list(range(1, max_values + 1))
    for _ in range(n):
        r = rng.random()
        if r < 0.45 and ins_left:
            labels.append((Kind.INS, ins_left.pop(rng.randrange(len(ins_left)))))
        elif r < 0.85 and rem_left:
            labels.append((Kind.REM, rem_left.pop(rng.randrange(len(rem_left)))))
        else:
            labels.append((Kind.REM, None))
    return labels


def random_history(
    rng: random.Random,
    spec: SeqSpecKind = SeqSpecKind.POOL,
    max_calls: int = 8,
    max_threads: int = 3,
    max_values: int = 4,
    threads: Optional[int] = None,
    sequential_bias: float = 0.7,
    pending: float = 0.0,
) -> History:
    """A random small history.

    Calls get a sequential order and labels, then each call is widened into
    an interval around its slot; a thread's calls never overlap.  With
    probability ``pending`` a thread's last call is left without response.
    """
    n = rng.randint(1, max_calls)
    k = threads if threads is not None else rng.randint(1, max_threads)
    if rng.random() < sequential_bias:
        labels = _sequential_run(rng, n, spec, max_values)
    else:
        labels = _random_labels(rng, n, max_values)
    owner = [rng.randrange(k) for _ in range(n)]
    spread = rng.choice((0.2, 0.8, 2.0, 4.0))
    free_at = [float("-inf")] * k
    stamped = []
    empties = 0
    for i, ((kind, core), t) in enumerate(zip(labels, owner)):
        start = max(i - rng.uniform(0, spread), free_at[t] + 0.01)
        end = max(start + 0.01, i + rng.uniform(0, spread))
        free_at[t] = end
        if core is None:
            value = Value(None, empties)
            empties += 1
        else:
            value = Value(core, 0)
        stamped.append((start, 1, t, Phase.INV, kind, value))
        stamped.append((end, 0, t, Phase.RES, kind, value))
    if pending:
        last = {}
        for s in stamped:
            if s[3] is Phase.RES:
                last[s[2]] = s
        drop = {id(s) for t, s in last.items() if rng.random() < pending}
        stamped = [s for s in stamped if id(s) not in drop]
    stamped.sort(key=lambda s: (s[0], s[1], s[2]))
    return History.from_records((t, p, kd, v, 0) for _, _, t, p, kd, v in stamped)
