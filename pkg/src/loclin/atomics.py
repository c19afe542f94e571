"""Word-sized atomics, tagged references and thread registration.

CPython exposes no compare-and-swap, so read-modify-write operations are
emulated with short critical sections (one lock per cell, striped locks for
arrays).  Plain loads and stores of a list slot are already atomic under the
interpreter lock, so ``load`` and ``store`` take no lock.  The algorithms
built on top only ever use ``load``/``store``/``cas``/``fetch_*`` and never
hold a lock across a step, which keeps their structure identical to the
lock-free originals.
"""

from __future__ import annotations

import random
import threading
from typing import Any, List, Optional

TAG_BITS = 16
TAG_MASK = (1 << TAG_BITS) - 1
NIL = -1


def pack(slot: int, tag: int) -> int:
    """Tagged reference word; the NIL slot packs to tag-only words."""
    return ((slot + 1) << TAG_BITS) | (tag & TAG_MASK)


def slot_of(word: int) -> int:
    return (word >> TAG_BITS) - 1


def tag_of(word: int) -> int:
    return word & TAG_MASK


def bump(word: int, slot: int) -> int:
    """New word pointing at ``slot`` with the tag of ``word`` advanced."""
    return pack(slot, tag_of(word) + 1)


class ArenaExhausted(RuntimeError):
    pass


class AtomicCell:
    __slots__ = ("value", "_lock")

    def __init__(self, value: Any = None) -> None:
        self.value = value
        self._lock = threading.Lock()

    def load(self) -> Any:
        return self.value

    def store(self, value: Any) -> None:
        self.value = value

    def cas(self, expected: Any, new: Any) -> bool:
        with self._lock:
            if self.value == expected:
                self.value = new
                return True
            return False

    def fetch_add(self, delta: int) -> int:
        with self._lock:
            old = self.value
            self.value = old + delta
            return old

    def fetch_or(self, bits: int) -> int:
        with self._lock:
            old = self.value
            self.value = old | bits
            return old


class AtomicArray:
    __slots__ = ("values", "_locks", "_mask")

    def __init__(self, size: int, fill: Any = None, stripes: int = 64) -> None:
        self.values: List[Any] = [fill] * size
        stripes = 1 << max(0, (stripes - 1).bit_length())
        self._locks = [threading.Lock() for _ in range(stripes)]
        self._mask = stripes - 1

    def __len__(self) -> int:
        return len(self.values)

    def load(self, i: int) -> Any:
        return self.values[i]

    def store(self, i: int, value: Any) -> None:
        self.values[i] = value

    def cas(self, i: int, expected: Any, new: Any) -> bool:
        with self._locks[i & self._mask]:
            if self.values[i] == expected:
                self.values[i] = new
                return True
            return False

    def fetch_add(self, i: int, delta: int) -> int:
        with self._locks[i & self._mask]:
            old = self.values[i]
            self.values[i] = old + delta
            return old

    def fetch_or(self, i: int, bits: int) -> int:
        with self._locks[i & self._mask]:
            old = self.values[i]
            self.values[i] = old | bits
            return old


class Allocator:
    """Bump allocator over a fixed number of arena slots."""

    __slots__ = ("capacity", "_next")

    def __init__(self, capacity: int, start: int = 0) -> None:
        self.capacity = capacity
        self._next = AtomicCell(start)

    def alloc(self) -> int:
        slot = self._next.fetch_add(1)
        if slot >= self.capacity:
            raise ArenaExhausted(f"arena of {self.capacity} slots exhausted")
        return slot

    @property
    def used(self) -> int:
        return min(self._next.load(), self.capacity)


# -- thread registration -------------------------------------------------------

MAX_THREADS = 128


class CapacityExceeded(RuntimeError):
    pass


class ThreadRegistry:
    """Dense small thread ids, shared by every container in the process.

    Workers may bind an explicit id (the bench does, for reproducibility);
    otherwise the first call to ``current()`` hands out the lowest free id.
    """

    def __init__(self, max_threads: int = MAX_THREADS) -> None:
        self.max_threads = max_threads
        self._local = threading.local()
        self._lock = threading.Lock()
        self._used: set = set()

    def bind(self, tid: int) -> int:
        if not 0 <= tid < self.max_threads:
            raise CapacityExceeded(f"thread id {tid} outside [0, {self.max_threads})")
        with self._lock:
            old = getattr(self._local, "tid", None)
            if old is not None:
                self._used.discard(old)
            self._used.add(tid)
        self._local.tid = tid
        return tid

    def current(self) -> int:
        tid = getattr(self._local, "tid", None)
        if tid is not None:
            return tid
        with self._lock:
            for cand in range(self.max_threads):
                if cand not in self._used:
                    self._used.add(cand)
                    self._local.tid = cand
                    return cand
        raise CapacityExceeded(f"more than {self.max_threads} registered threads")

    def release(self) -> None:
        tid = getattr(self._local, "tid", None)
        if tid is not None:
            with self._lock:
                self._used.discard(tid)
            self._local.tid = None


registry = ThreadRegistry()


def thread_id() -> int:
    return registry.current()


class PerThread:
    """Per-thread slots indexed by registered thread id (never shared)."""

    __slots__ = ("_slots", "_factory")

    def __init__(self, factory, size: int = MAX_THREADS) -> None:
        self._slots: List[Optional[Any]] = [None] * size
        self._factory = factory

    def get(self, tid: Optional[int] = None) -> Any:
        if tid is None:
            tid = registry.current()
        v = self._slots[tid]
        if v is None:
            v = self._slots[tid] = self._factory(tid)
        return v

    def set(self, value: Any, tid: Optional[int] = None) -> None:
        if tid is None:
            tid = registry.current()
        self._slots[tid] = value


def thread_rngs(seed: int, size: int = MAX_THREADS) -> PerThread:
    """A reproducible ``random.Random`` per thread id."""
    return PerThread(lambda tid: random.Random(seed * 1_000_003 + tid), size)
