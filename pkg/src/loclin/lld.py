"""LLD and LL+D: a locally linearizable container built from one linearizable
backend per inserting thread.

Inserts go to the caller's own backend.  Removes try the own backend first
and then sweep the others, starting from a random slot.  The plain mode
answers empty after one clean sweep; the ``plus`` mode additionally re-reads
every backend's state token and answers empty only if none moved, which makes
the empty answer linearizable.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

from .atomics import MAX_THREADS, CapacityExceeded, registry, thread_rngs
from .backends import DEFAULT_CAPACITY, Backend, make_backend


class Mode(enum.Enum):
    LLD = "lld"
    LLPLUSD = "llplusd"


@dataclass(eq=False)
class Node:
    backend: Backend
    alive: bool = True


@dataclass(eq=False)
class Segment:
    """Registry of backend nodes; ``version`` changes on every announce and cleanup."""

    capacity: int = MAX_THREADS
    nodes: List[Optional[Node]] = field(default_factory=list)
    l: int = 0
    version: int = 0

    def __post_init__(self) -> None:
        self.nodes = [None] * self.capacity
        self._lock = threading.Lock()

    def announce(self, make: Callable[[], Backend]) -> Node:
        with self._lock:
            node = None
            for i in range(self.l):
                cand = self.nodes[i]
                if cand is not None and not cand.alive:
                    node = cand
                    break
            if node is None:
                if self.l >= self.capacity:
                    raise CapacityExceeded(f"more than {self.capacity} live nodes")
                node = Node(make(), alive=False)
                self.nodes[self.l] = node
                self.l += 1
            node.alive = True
            self.version += 1
            return node

    def cleanup(self, node: Node, old_version: int) -> bool:
        """Drop a dead node; a no-op unless nothing changed since ``old_version``."""
        with self._lock:
            try:
                j = self.nodes.index(node, 0, self.l)
            except ValueError:
                return False
            if node.alive or old_version != self.version:
                return False
            last = self.l - 1
            self.nodes[j] = self.nodes[last]
            self.l = last
            self.version += 1
            self.nodes[last] = None
            return True

    def live_nodes(self) -> List[Node]:
        return [n for n in self.nodes[: self.l] if n is not None]


class LLD:
    def __init__(
        self,
        backend: str = "ms",
        mode: Mode = Mode.LLD,
        k: int = 4,
        max_threads: int = MAX_THREADS,
        seed: int = 0,
        capacity: int = DEFAULT_CAPACITY,
    ) -> None:
        self.backend_kind = backend
        self.mode = Mode(mode)
        self.k = k
        self.capacity = capacity
        self.segment = Segment(max_threads)
        self._seed = seed
        self._announced = 0
        self._local: List[Optional[Node]] = [None] * registry.max_threads
        self._rng = thread_rngs(seed, registry.max_threads)
        probe = make_backend(backend, k=k, capacity=1, seed=seed)
        if self.mode is Mode.LLPLUSD and not probe.stateful:
            raise ValueError(f"LL+D needs a stateful backend, {backend!r} has no state token")
        self.name = f"{self.mode.value}-{backend}"

    def _make_backend(self) -> Backend:
        self._announced += 1  # only called under the segment lock
        return make_backend(self.backend_kind, k=self.k, capacity=self.capacity, seed=self._seed * 7919 + self._announced)

    def local_node(self, create: bool = False) -> Optional[Node]:
        tid = registry.current()
        node = self._local[tid]
        if node is None and create:
            node = self._local[tid] = self.segment.announce(self._make_backend)
        return node

    def insert(self, item: Any) -> None:
        self.local_node(create=True).backend.insert(item)

    def remove(self) -> Optional[Any]:
        tid = registry.current()
        node = self._local[tid]
        if node is not None:
            item, _ = node.backend.remove()
            if item is not None:
                return item
        s = self.segment
        rng = self._rng.get(tid)
        plus = self.mode is Mode.LLPLUSD
        states: List[Any] = [None] * s.capacity
        while True:
            retry = False
            old_version = s.version
            l = s.l
            start = rng.randrange(l) if l > 1 else 0
            order = [(start + j) % l for j in range(l)]
            for i in order:
                n = s.nodes[i]
                if old_version != s.version or n is None:
                    retry = True
                    break
                alive = n.alive
                item, state = n.backend.remove()
                if item is not None:
                    return item
                states[i] = state
                if not alive:
                    s.cleanup(n, old_version)
                    retry = True
                    break
            if retry or old_version != s.version:
                continue
            if plus:
                for i in order:
                    n = s.nodes[i]
                    if n is None or n.backend.get_state() != states[i]:
                        retry = True
                        break
                if retry or old_version != s.version:
                    continue
            return None

    def terminate(self) -> None:
        tid = registry.current()
        node = self._local[tid]
        if node is not None:
            node.alive = False
            self._local[tid] = None

    def drain(self) -> List[Any]:
        out = []
        while True:
            item = self.remove()
            if item is None:
                return out
            out.append(item)
