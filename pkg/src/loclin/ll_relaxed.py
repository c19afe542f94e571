"""Locally linearizable k-FIFO queue and k-Stack.

Both keep every thread from inserting twice into the same segment.  The
k-FIFO remembers, per thread, the tail it last enqueued into and moves the
tail on before reusing it; the k-Stack keeps a per-segment bitmap of the
threads that pushed into it and prepends a fresh segment instead.

With ``audit=True`` every successful insert records the segment it landed
in, so the one-insert-per-segment property can be checked after a run.
"""

from __future__ import annotations

from collections import Counter
from typing import Any, Dict, List, Optional, Tuple

from .atomics import AtomicArray, registry, slot_of
from .backends import DEFAULT_CAPACITY, KFifo, KStack


class _Audit:
    def __init__(self, enabled: bool) -> None:
        self.enabled = enabled
        self._log: List[Optional[List[int]]] = [None] * registry.max_threads

    def record(self, seg: int) -> None:
        if self.enabled:
            tid = registry.current()
            log = self._log[tid]
            if log is None:
                log = self._log[tid] = []
            log.append(seg)

    def pairs(self) -> List[Tuple[int, int]]:
        return [(tid, seg) for tid, log in enumerate(self._log) if log for seg in log]

    def repeats(self) -> Dict[Tuple[int, int], int]:
        """(thread, segment) pairs used by more than one insert."""
        counts = Counter(self.pairs())
        return {pair: n for pair, n in counts.items() if n > 1}


class LLKFifo(KFifo):
    name = "ll-kfifo"

    def __init__(self, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0, audit: bool = False) -> None:
        super().__init__(k=k, capacity=capacity, seed=seed)
        self._last_tail: List[Optional[int]] = [None] * registry.max_threads
        self.audit = _Audit(audit)

    def _must_advance(self, tail_old: int) -> bool:
        return self._last_tail[registry.current()] == tail_old

    def _enqueued(self, tail_old: int) -> None:
        self._last_tail[registry.current()] = tail_old
        self.audit.record(slot_of(tail_old))


class LLKStack(KStack):
    name = "ll-kstack"

    def __init__(self, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0, audit: bool = False) -> None:
        super().__init__(k=k, capacity=capacity, seed=seed)
        # one bit per thread id; Python ints hold all of them in one word
        self._used = AtomicArray(self.max_segments, fill=0)
        self.audit = _Audit(audit)

    def _is_marked(self, seg: int) -> bool:
        return (self._used.load(seg) >> registry.current()) & 1 == 1

    def _mark(self, seg: int) -> None:
        self._used.fetch_or(seg, 1 << registry.current())

    def _unmark(self, seg: int) -> None:
        # the segment was never published, so no other thread can see it
        self._used.store(seg, 0)

    def _pushed(self, seg: int) -> None:
        self.audit.record(seg)


def make_ll_relaxed(kind: str, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0, audit: bool = False):
    if kind == "kfifo":
        return LLKFifo(k=k, capacity=capacity, seed=seed, audit=audit)
    if kind == "kstack":
        return LLKStack(k=k, capacity=capacity, seed=seed, audit=audit)
    raise ValueError(f"no locally linearizable variant of {kind!r}")


__all__ = ["LLKFifo", "LLKStack", "make_ll_relaxed"]
