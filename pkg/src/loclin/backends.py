"""Linearizable building blocks: Michael-Scott queue, Treiber stack, k-FIFO
queue and k-Stack.

Every structure lives in preallocated arrays (an arena) and links nodes by
index; nothing is reclaimed during a run.  Shared references are tagged
words (see ``atomics.pack``) so that a stale compare-and-swap fails.

``remove`` returns ``(item, token)`` where ``item`` is ``None`` for an empty
answer.  Stateful structures (MS queue, Treiber stack) hand out a state token
with every empty answer and from ``get_state``; the token cannot repeat
across an insert.
"""

from __future__ import annotations

from typing import Any, List, Optional, Tuple

from .atomics import (
    NIL,
    Allocator,
    AtomicArray,
    AtomicCell,
    PerThread,
    bump,
    pack,
    slot_of,
    thread_rngs,
)

DEFAULT_CAPACITY = 1 << 16


class Unsupported(TypeError):
    """The structure has no usable state token."""


class Backend:
    stateful = False
    name = "backend"

    def insert(self, item: Any) -> None:
        raise NotImplementedError

    def remove(self) -> Tuple[Optional[Any], Any]:
        raise NotImplementedError

    def get_state(self) -> Any:
        raise Unsupported(f"{self.name} has no state token")

    def drain(self) -> List[Any]:
        out = []
        while True:
            item, _ = self.remove()
            if item is None:
                return out
            out.append(item)


# -- Michael-Scott queue -----------------------------------------------------------


class MSQueue(Backend):
    stateful = True
    name = "ms"

    def __init__(self, capacity: int = DEFAULT_CAPACITY, seed: int = 0) -> None:
        self.capacity = capacity
        self._val: List[Any] = [None] * (capacity + 1)
        self._next = AtomicArray(capacity + 1, fill=pack(NIL, 0))
        self._alloc = Allocator(capacity + 1, start=1)  # slot 0 is the dummy
        self._head = AtomicCell(pack(0, 0))
        self._tail = AtomicCell(pack(0, 0))

    def insert(self, item: Any) -> None:
        slot = self._alloc.alloc()
        self._val[slot] = item
        nxt, tail_cell = self._next, self._tail
        while True:
            tail = tail_cell.load()
            ts = slot_of(tail)
            nx = nxt.load(ts)
            if tail != tail_cell.load():
                continue
            if slot_of(nx) == NIL:
                if nxt.cas(ts, nx, bump(nx, slot)):
                    tail_cell.cas(tail, bump(tail, slot))
                    return
            else:
                tail_cell.cas(tail, bump(tail, slot_of(nx)))

    def remove(self) -> Tuple[Optional[Any], Any]:
        nxt, head_cell, tail_cell = self._next, self._head, self._tail
        while True:
            head = head_cell.load()
            tail = tail_cell.load()
            hs = slot_of(head)
            nx = nxt.load(hs)
            if head != head_cell.load():
                continue
            if hs == slot_of(tail):
                if slot_of(nx) == NIL:
                    # head, tail and the null link were all current at the read of nx
                    return None, (head, tail)
                tail_cell.cas(tail, bump(tail, slot_of(nx)))
            else:
                ns = slot_of(nx)
                item = self._val[ns]
                if head_cell.cas(head, bump(head, ns)):
                    return item, None

    def get_state(self) -> Any:
        nxt, head_cell, tail_cell = self._next, self._head, self._tail
        while True:
            head = head_cell.load()
            tail = tail_cell.load()
            nx = nxt.load(slot_of(tail))
            if head != head_cell.load():
                continue
            if slot_of(nx) != NIL:
                tail_cell.cas(tail, bump(tail, slot_of(nx)))
                continue
            return head, tail


# -- Treiber stack ---------------------------------------------------------------------


class TreiberStack(Backend):
    stateful = True
    name = "treiber"

    def __init__(self, capacity: int = DEFAULT_CAPACITY, seed: int = 0) -> None:
        self.capacity = capacity
        self._val: List[Any] = [None] * capacity
        self._next: List[int] = [pack(NIL, 0)] * capacity
        self._alloc = Allocator(capacity)
        self._top = AtomicCell(pack(NIL, 0))

    def insert(self, item: Any) -> None:
        slot = self._alloc.alloc()
        self._val[slot] = item
        top_cell = self._top
        while True:
            top = top_cell.load()
            self._next[slot] = top
            if top_cell.cas(top, bump(top, slot)):
                return

    def remove(self) -> Tuple[Optional[Any], Any]:
        top_cell = self._top
        while True:
            top = top_cell.load()
            s = slot_of(top)
            if s == NIL:
                return None, top
            below = slot_of(self._next[s])
            if top_cell.cas(top, bump(top, below)):
                return self._val[s], None

    def get_state(self) -> Any:
        return self._top.load()


# -- segmented relaxed structures ---------------------------------------------------------

EMPTY_WORD = (None, 0)


class KFifo(Backend):
    """k-FIFO queue: a linked list of k-slot segments with head and tail words.

    Segments carry sequence numbers increasing along the list; they decide
    whether a segment is behind the head, at the head, or after it.
    """

    name = "kfifo"

    def __init__(self, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0) -> None:
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.capacity = capacity
        self.max_segments = 2 * capacity + 16
        self._slots = AtomicArray(self.max_segments * k, fill=EMPTY_WORD)
        self._next = AtomicArray(self.max_segments, fill=NIL)
        self._seq: List[int] = [0] * self.max_segments
        self._alloc = Allocator(self.max_segments, start=1)
        self._spare = PerThread(lambda tid: [])
        self._rng = thread_rngs(seed)
        self._head = AtomicCell(pack(0, 0))
        self._tail = AtomicCell(pack(0, 0))

    # hooks for the locally linearizable variant
    def _must_advance(self, tail_old: int) -> bool:
        return False

    def _enqueued(self, tail_old: int) -> None:
        pass

    def _scan(self, seg: int, want_item: bool):
        return scan_segment(self._slots, seg, self.k, self._rng.get(), want_item)

    def insert(self, item: Any) -> None:
        k = self.k
        slots, tail_cell = self._slots, self._tail
        while True:
            tail_old = tail_cell.load()
            if self._must_advance(tail_old):
                self._advance_tail(tail_old)
                continue
            w, idx, _ = self._scan(slot_of(tail_old), want_item=False)
            if tail_old != tail_cell.load():
                continue
            if idx >= 0:
                new = (item, w[1] + 1)
                pos = slot_of(tail_old) * k + idx
                if slots.cas(pos, w, new) and self._committed(tail_old, new, pos):
                    self._enqueued(tail_old)
                    return
            else:
                self._advance_tail(tail_old)

    def _committed(self, tail_old: int, new: Tuple[Any, int], pos: int) -> bool:
        slots = self._slots
        if slots.load(pos) != new:
            return True  # already dequeued
        head_cur = self._head.load()
        retract = (None, new[1] + 1)
        mine, at_head = self._seq[slot_of(tail_old)], self._seq[slot_of(head_cur)]
        if mine > at_head:
            return True
        if mine < at_head:
            return not slots.cas(pos, new, retract)
        if self._head.cas(head_cur, bump(head_cur, slot_of(head_cur))):
            return True
        return not slots.cas(pos, new, retract)

    def _advance_tail(self, tail_old: int) -> None:
        tail_cell = self._tail
        if tail_old != tail_cell.load():
            return
        s = slot_of(tail_old)
        nx = self._next.load(s)
        if tail_old != tail_cell.load():
            return
        if nx != NIL:
            tail_cell.cas(tail_old, bump(tail_old, nx))
            return
        spare = self._spare.get()
        new = spare.pop() if spare else self._alloc.alloc()
        self._seq[new] = self._seq[s] + 1
        if self._next.cas(s, NIL, new):
            tail_cell.cas(tail_old, bump(tail_old, new))
        else:
            spare.append(new)

    def _advance_head(self, head_old: int) -> None:
        head_cell, tail_cell = self._head, self._tail
        if head_old != head_cell.load():
            return
        tail_cur = tail_cell.load()
        hs = slot_of(head_old)
        nx = self._next.load(hs)
        if head_old != head_cell.load():
            return
        if hs == slot_of(tail_cur):
            if nx == NIL:
                return
            if tail_cur == tail_cell.load():
                tail_cell.cas(tail_cur, bump(tail_cur, nx))
        head_cell.cas(head_old, bump(head_old, nx))

    def remove(self) -> Tuple[Optional[Any], Any]:
        k = self.k
        slots, head_cell, tail_cell = self._slots, self._head, self._tail
        while True:
            head_old = head_cell.load()
            hs = slot_of(head_old)
            w, idx, seen = self._scan(hs, want_item=True)
            tail_old = tail_cell.load()
            if head_old != head_cell.load():
                continue
            if idx >= 0:
                if hs == slot_of(tail_old):
                    self._advance_tail(tail_old)
                if slots.cas(hs * k + idx, w, (None, w[1] + 1)):
                    return w[0], None
            else:
                if hs == slot_of(tail_old) and tail_old == tail_cell.load():
                    if unchanged(slots, hs, k, seen) and head_old == head_cell.load() and tail_old == tail_cell.load():
                        return None, None
                    continue
                self._advance_head(head_old)

    def segments_in_use(self) -> int:
        return self._alloc.used


class KStack(Backend):
    """k-Stack: a stack of k-slot segments with a tagged top word."""

    name = "kstack"

    def __init__(self, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0) -> None:
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.capacity = capacity
        self.max_segments = capacity + 16
        self._slots = AtomicArray(self.max_segments * k, fill=EMPTY_WORD)
        self._next: List[int] = [NIL] * self.max_segments
        self._removing = AtomicArray(self.max_segments, fill=0)
        self._alloc = Allocator(self.max_segments, start=1)
        self._spare = PerThread(lambda tid: [])
        self._rng = thread_rngs(seed)
        self._top = AtomicCell(pack(0, 0))

    # hooks for the locally linearizable variant
    def _is_marked(self, seg: int) -> bool:
        return False

    def _mark(self, seg: int) -> None:
        pass

    def _unmark(self, seg: int) -> None:
        pass

    def _pushed(self, seg: int) -> None:
        pass

    def _scan(self, seg: int, want_item: bool):
        return scan_segment(self._slots, seg, self.k, self._rng.get(), want_item)

    def _try_add_segment(self, top_old: int, item: Any) -> bool:
        if top_old != self._top.load():
            return False
        spare = self._spare.get()
        new = spare.pop() if spare else self._alloc.alloc()
        self._next[new] = slot_of(top_old)
        self._slots.store(new * self.k, (item, 0))
        self._mark(new)
        if self._top.cas(top_old, bump(top_old, new)):
            self._pushed(new)
            return True
        self._slots.store(new * self.k, EMPTY_WORD)
        self._unmark(new)
        spare.append(new)
        return False

    def _try_remove_segment(self, top_old: int) -> None:
        top_cell = self._top
        if top_old != top_cell.load():
            return
        s = slot_of(top_old)
        below = self._next[s]
        if below == NIL:
            return
        self._removing.fetch_add(s, 1)
        _, idx, _ = self._scan(s, want_item=True)
        if idx < 0 and top_cell.cas(top_old, bump(top_old, below)):
            return
        self._removing.fetch_add(s, -1)

    def _committed(self, top_old: int, new: Tuple[Any, int], pos: int) -> bool:
        slots, top_cell = self._slots, self._top
        if slots.load(pos) != new:
            return True
        if self._removing.load(slot_of(top_old)) == 0:
            return True
        retract = (None, new[1] + 1)
        if top_old != top_cell.load():
            return not slots.cas(pos, new, retract)
        if top_cell.cas(top_old, bump(top_old, slot_of(top_old))):
            return True
        return not slots.cas(pos, new, retract)

    def insert(self, item: Any) -> None:
        k = self.k
        slots, top_cell = self._slots, self._top
        while True:
            top_old = top_cell.load()
            s = slot_of(top_old)
            if self._is_marked(s):
                if self._try_add_segment(top_old, item):
                    return
                continue
            w, idx, _ = self._scan(s, want_item=False)
            if top_old != top_cell.load():
                continue
            if idx >= 0:
                new = (item, w[1] + 1)
                pos = s * k + idx
                if slots.cas(pos, w, new) and self._committed(top_old, new, pos):
                    self._mark(s)
                    self._pushed(s)
                    return
            elif self._try_add_segment(top_old, item):
                return

    def remove(self) -> Tuple[Optional[Any], Any]:
        k = self.k
        slots, top_cell = self._slots, self._top
        while True:
            top_old = top_cell.load()
            s = slot_of(top_old)
            w, idx, seen = self._scan(s, want_item=True)
            if top_old != top_cell.load():
                continue
            if idx >= 0:
                if slots.cas(s * k + idx, w, (None, w[1] + 1)):
                    return w[0], None
            elif self._next[s] == NIL:
                if unchanged(slots, s, k, seen) and top_old == top_cell.load():
                    return None, None
            else:
                self._try_remove_segment(top_old)

    def segments_in_use(self) -> int:
        return self._alloc.used


# -- scanning helpers --------------------------------------------------------------------------


def scan_segment(slots: AtomicArray, seg: int, k: int, rng, want_item: bool):
    """Scan the k slots of ``seg`` starting at a random offset.

    Returns ``(word, index, seen)``: the first word matching (an item when
    ``want_item``, else an empty slot) with its index, or index -1 when none
    matched.  ``seen`` lists ``(index, word)`` for every slot read.
    """
    base = seg * k
    load = slots.load
    start = rng.randrange(k) if k > 1 else 0
    seen = []
    w = EMPTY_WORD
    for j in range(k):
        i = start + j
        if i >= k:
            i -= k
        w = load(base + i)
        if (w[0] is not None) == want_item:
            return w, i, seen
        seen.append((i, w))
    return w, -1, seen


def unchanged(slots: AtomicArray, seg: int, k: int, seen) -> bool:
    """Second collect over a fully scanned segment.

    Slot versions only grow, so equal words at both reads mean the slot was
    untouched in between, and the segment was entirely empty at one instant.
    """
    base = seg * k
    load = slots.load
    return all(load(base + i) == w for i, w in seen)


# -- factory ------------------------------------------------------------------------------------

BACKENDS = {"ms": MSQueue, "treiber": TreiberStack, "kfifo": KFifo, "kstack": KStack}


def make_backend(kind: str, k: int = 4, capacity: int = DEFAULT_CAPACITY, seed: int = 0) -> Backend:
    cls = BACKENDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown backend {kind!r}")
    if cls in (KFifo, KStack):
        return cls(k=k, capacity=capacity, seed=seed)
    return cls(capacity=capacity, seed=seed)
