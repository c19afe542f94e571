"""Workload driver, history recorder and run verification.

Two workloads:

* ``prodcon``: half the threads insert ``ops`` values each, the other half
  remove until every produced value has been consumed;
* ``seqalt``: every thread alternates one insert and one remove, ``ops`` times.

Threads busy-wait ``delay_ns`` between operations.  When recording, each
operation is stamped with the global monotonic clock right before and right
after the call; the per-thread logs are merged into one history afterwards.
"""

from __future__ import annotations

import bisect
import heapq
import sys
import threading
import time
from array import array
from dataclasses import dataclass, field
from itertools import count
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from .atomics import AtomicCell, registry
from .backends import Backend, make_backend
from .checkers import (
    BoundExceeded,
    DEFAULT_BOUND,
    Verdict,
    check_linearizable,
    check_locally_linearizable,
    check_pool_sanity,
    check_queue_loclin_order,
)
from .history import Event, History, Kind, MethodCall, Phase, Value, project_calls, serialize_history
from .ll_relaxed import LLKFifo, LLKStack
from .lld import LLD, Mode
from .seqspec import SeqSpecKind

STRUCTURES = (
    "ms", "treiber", "kfifo", "kstack",
    "lld-ms", "lld-treiber", "lld-kfifo", "lld-kstack",
    "llplusd-ms", "llplusd-treiber",
    "ll-kfifo", "ll-kstack",
)
WORKLOADS = ("prodcon", "seqalt")
DEFAULT_RECORD_CAPACITY = 1 << 21  # events per thread


class ConfigInvalid(ValueError):
    pass


class BufferFull(RuntimeError):
    pass


# -- structures ----------------------------------------------------------------------


class BaseContainer:
    """Uniform face over a bare backend (no-op terminate)."""

    def __init__(self, backend: Backend) -> None:
        self.backend = backend
        self.name = backend.name

    def insert(self, item: Any) -> None:
        self.backend.insert(item)

    def remove(self) -> Optional[Any]:
        return self.backend.remove()[0]

    def terminate(self) -> None:
        pass

    def drain(self) -> List[Any]:
        return self.backend.drain()


def split_structure(name: str) -> Tuple[str, str]:
    """``'lld-ms'`` -> ``('lld', 'ms')``; bare backends get mode ``'base'``."""
    if name not in STRUCTURES:
        raise ConfigInvalid(f"unknown structure {name!r}")
    mode, _, base = name.rpartition("-")
    return (mode or "base"), base


def make_structure(name: str, k: int = 4, capacity: int = 1 << 16, seed: int = 0, audit: bool = False):
    mode, base = split_structure(name)
    if mode == "base":
        return BaseContainer(make_backend(base, k=k, capacity=capacity, seed=seed))
    if mode in ("lld", "llplusd"):
        return LLD(base, Mode(mode), k=k, seed=seed, capacity=capacity)
    cls = LLKFifo if base == "kfifo" else LLKStack
    s = cls(k=k, capacity=capacity, seed=seed, audit=audit)
    return BaseContainer(s)


def spec_of(name: str, k: int = 4) -> SeqSpecKind:
    """Sequential spec the structure's backend is linearizable against."""
    _, base = split_structure(name)
    if base == "ms" or (base == "kfifo" and k == 1):
        return SeqSpecKind.QUEUE
    if base == "treiber" or (base == "kstack" and k == 1):
        return SeqSpecKind.STACK
    return SeqSpecKind.POOL


# -- configuration and report ------------------------------------------------------------


@dataclass
class WorkloadConfig:
    structure: str = "ms"
    workload: str = "prodcon"
    k: int = 4
    threads: int = 2
    ops: int = 1000
    delay_ns: int = 5000
    seed: int = 0
    record: bool = False
    record_capacity: int = DEFAULT_RECORD_CAPACITY
    switch_interval_s: Optional[float] = None
    audit: bool = False

    def validate(self) -> None:
        split_structure(self.structure)
        if self.workload not in WORKLOADS:
            raise ConfigInvalid(f"unknown workload {self.workload!r}")
        if self.threads < 1:
            raise ConfigInvalid("threads must be at least 1")
        if self.workload == "prodcon" and self.threads % 2:
            raise ConfigInvalid("prodcon needs an even thread count (producers = consumers)")
        if self.threads >= registry.max_threads:
            raise ConfigInvalid(f"at most {registry.max_threads - 1} worker threads")
        if self.ops < 1:
            raise ConfigInvalid("ops must be at least 1")
        if self.delay_ns < 0:
            raise ConfigInvalid("delay must be non-negative")
        if self.k < 1:
            raise ConfigInvalid("k must be at least 1")
        if self.record_capacity < 2:
            raise ConfigInvalid("record capacity too small")

    @property
    def mode(self) -> str:
        return split_structure(self.structure)[0]

    @property
    def base(self) -> str:
        return split_structure(self.structure)[1]


CSV_HEADER = "structure,mode,threads,ops,delay_ns,seed,throughput_ops_s,empties,residue"


@dataclass
class RunReport:
    config: WorkloadConfig
    total_ops: int
    wall_s: float
    per_thread: List[int]
    inserted: int
    removed: int
    empties: int
    residue: int
    clock_resolution_ns: float
    history: Optional[History] = None
    history_path: Optional[str] = None
    audit_repeats: Dict[Tuple[int, int], int] = field(default_factory=dict)
    residue_values: List[Any] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def throughput(self) -> float:
        return self.total_ops / self.wall_s if self.wall_s > 0 else float("inf")

    @property
    def conserved(self) -> bool:
        return self.inserted == self.removed + self.residue

    def csv_row(self) -> str:
        c = self.config
        return (
            f"{c.base},{c.mode},{c.threads},{c.ops},{c.delay_ns},{c.seed},"
            f"{self.throughput:.1f},{self.empties},{self.residue}"
        )


# -- recorder --------------------------------------------------------------------------------

INS, REM, REM_EMPTY = 0, 1, 2


class ThreadLog:
    """Preallocated per-thread operation log (two events per operation)."""

    __slots__ = ("t_inv", "t_res", "code", "core", "n", "cap")

    def __init__(self, capacity_events: int) -> None:
        cap = capacity_events // 2
        self.cap = cap
        self.t_inv = array("q", bytes(8 * cap))
        self.t_res = array("q", bytes(8 * cap))
        self.code = array("b", bytes(cap))
        self.core = array("q", bytes(8 * cap))
        self.n = 0

    def log(self, t0: int, t1: int, code: int, core: int) -> None:
        n = self.n
        if n >= self.cap:
            raise BufferFull(f"recording buffer of {2 * self.cap} events is full")
        self.t_inv[n] = t0
        self.t_res[n] = t1
        self.code[n] = code
        self.core[n] = core
        self.n = n + 1


def merge_logs(logs: Sequence[ThreadLog]) -> History:
    """Merge per-thread logs by timestamp.

    Equal timestamps put invocations before responses so that tied calls
    overlap; a thread's own events keep their order regardless.
    """

    def stream(tid: int, log: ThreadLog) -> Iterator[Tuple[int, int, int, int, int]]:
        for i in range(log.n):
            yield (log.t_inv[i], 0, tid, i, log.code[i])
            yield (log.t_res[i], 1, tid, i, log.code[i])

    empties = count()
    empty_version: Dict[Tuple[int, int], Value] = {}
    records = []
    for ts, phase, tid, i, code in heapq.merge(*(stream(t, l) for t, l in enumerate(logs))):
        log = logs[tid]
        if code == INS:
            kind, value = Kind.INS, Value(log.core[i], 0)
        elif code == REM:
            kind, value = Kind.REM, Value(log.core[i], 0)
        else:
            kind = Kind.REM
            value = empty_version.get((tid, i))
            if value is None:
                value = empty_version[(tid, i)] = Value(None, next(empties))
        records.append((tid, Phase.INV if phase == 0 else Phase.RES, kind, value, 0))
    return History.from_records(records)


def _spin(delay_ns: int, now: Callable[[], int] = time.perf_counter_ns) -> None:
    if delay_ns:
        end = now() + delay_ns
        while now() < end:
            pass


# -- workloads --------------------------------------------------------------------------------


def _run(cfg: WorkloadConfig, body: Callable[..., None]) -> RunReport:
    cfg.validate()
    # a dead LLD node may be reused by a later thread, so every backend gets room for all inserts
    capacity = cfg.threads * cfg.ops + 16
    container = make_structure(cfg.structure, k=cfg.k, capacity=capacity, seed=cfg.seed, audit=cfg.audit)
    logs = [ThreadLog(cfg.record_capacity) if cfg.record else None for _ in range(cfg.threads)]
    counts = [[0, 0, 0, 0] for _ in range(cfg.threads)]  # ops, inserted, removed, empties
    errors: List[BaseException] = []
    barrier = threading.Barrier(cfg.threads + 1)
    stop = threading.Event()

    def worker(tid: int) -> None:
        registry.bind(tid)
        try:
            barrier.wait()
            body(tid, container, logs[tid], counts[tid], stop)
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:  # reported by the driver
            errors.append(exc)
            stop.set()
            barrier.abort()
        finally:
            container.terminate()
            registry.release()

    old_interval = sys.getswitchinterval()
    if cfg.switch_interval_s is not None:
        sys.setswitchinterval(cfg.switch_interval_s)
    try:
        workers = [threading.Thread(target=worker, args=(t,), name=f"worker-{t}") for t in range(cfg.threads)]
        for w in workers:
            w.start()
        try:
            barrier.wait()
        except threading.BrokenBarrierError:
            pass
        t0 = time.perf_counter()
        for w in workers:
            w.join()
        wall = time.perf_counter() - t0
    finally:
        sys.setswitchinterval(old_interval)
    if errors:
        raise errors[0]

    registry.bind(cfg.threads)
    try:
        residue = container.drain()
    finally:
        registry.release()

    report = RunReport(
        config=cfg,
        total_ops=sum(c[0] for c in counts),
        wall_s=wall,
        per_thread=[c[0] for c in counts],
        inserted=sum(c[1] for c in counts),
        removed=sum(c[2] for c in counts),
        empties=sum(c[3] for c in counts),
        residue=len(residue),
        residue_values=residue,
        clock_resolution_ns=time.get_clock_info("perf_counter").resolution * 1e9,
    )
    if cfg.record:
        report.history = merge_logs([l for l in logs if l is not None])
    audit = getattr(getattr(container, "backend", None), "audit", None)
    if audit is not None and audit.enabled:
        report.audit_repeats = audit.repeats()
    if cfg.base == "kfifo" and cfg.workload == "seqalt":
        report.notes.append("k-FIFO removes scan whole segments and degrade when the queue is nearly empty")
    return report


def run_producer_consumer(cfg: WorkloadConfig) -> RunReport:
    if cfg.workload != "prodcon":
        cfg = WorkloadConfig(**{**cfg.__dict__, "workload": "prodcon"})
    cfg.validate()
    producers = cfg.threads // 2
    total = producers * cfg.ops
    consumed = AtomicCell(0)
    now = time.perf_counter_ns
    delay, ops = cfg.delay_ns, cfg.ops

    def body(tid: int, c: Any, log: Optional[ThreadLog], cnt: List[int], stop: threading.Event) -> None:
        if tid < producers:
            base = tid * ops
            for i in range(ops):
                t0 = now()
                c.insert(base + i)
                t1 = now()
                if log is not None:
                    log.log(t0, t1, INS, base + i)
                cnt[0] += 1
                cnt[1] += 1
                _spin(delay, now)
            return
        while consumed.load() < total and not stop.is_set():
            t0 = now()
            item = c.remove()
            t1 = now()
            cnt[0] += 1
            if item is None:
                cnt[3] += 1
                if log is not None:
                    log.log(t0, t1, REM_EMPTY, 0)
            else:
                cnt[2] += 1
                consumed.fetch_add(1)
                if log is not None:
                    log.log(t0, t1, REM, item)
            _spin(delay, now)

    return _run(cfg, body)


def run_seq_alternating(cfg: WorkloadConfig) -> RunReport:
    if cfg.workload != "seqalt":
        cfg = WorkloadConfig(**{**cfg.__dict__, "workload": "seqalt"})
    now = time.perf_counter_ns
    delay, ops = cfg.delay_ns, cfg.ops

    def body(tid: int, c: Any, log: Optional[ThreadLog], cnt: List[int], stop: threading.Event) -> None:
        base = tid * ops
        for i in range(ops):
            t0 = now()
            c.insert(base + i)
            t1 = now()
            if log is not None:
                log.log(t0, t1, INS, base + i)
            cnt[0] += 1
            cnt[1] += 1
            _spin(delay, now)
            t0 = now()
            item = c.remove()
            t1 = now()
            cnt[0] += 1
            if item is None:
                cnt[3] += 1
                if log is not None:
                    log.log(t0, t1, REM_EMPTY, 0)
            else:
                cnt[2] += 1
                if log is not None:
                    log.log(t0, t1, REM, item)
            _spin(delay, now)

    return _run(cfg, body)


def run_workload(cfg: WorkloadConfig) -> RunReport:
    if cfg.workload == "seqalt":
        return run_seq_alternating(cfg)
    if cfg.workload == "prodcon":
        return run_producer_consumer(cfg)
    raise ConfigInvalid(f"unknown workload {cfg.workload!r}")


def write_history(report: RunReport, path: str | Path) -> None:
    if report.history is None:
        raise ValueError("run was not recorded")
    Path(path).write_text(serialize_history(report.history))
    report.history_path = str(path)


# -- windows ---------------------------------------------------------------------------------------


def value_windows(
    h: History,
    values_per_window: int,
    by_thread: bool = True,
    max_calls: int = DEFAULT_BOUND,
) -> Iterator[History]:
    """Cut ``h`` into value-closed windows.

    Values are grouped in insertion order, per inserting thread when
    ``by_thread`` (local checks) or globally otherwise.  Each window holds
    every call on its values, topped up with empty removes that overlap the
    window's time span, without exceeding ``max_calls``.  Together the
    windows cover every value of ``h``.
    """
    calls_of: Dict[Value, List[MethodCall]] = {}
    inserts: List[MethodCall] = []
    empties: List[MethodCall] = []
    for c in h.calls:
        if c.value.is_empty:
            empties.append(c)
            continue
        calls_of.setdefault(c.value, []).append(c)
        if c.kind is Kind.INS:
            inserts.append(c)
    # removes of values never inserted still need a window
    orphans = [v for v in calls_of if not any(c.kind is Kind.INS for c in calls_of[v])]

    groups: Dict[int, List[Value]] = {}
    for c in inserts:
        groups.setdefault(c.thread if by_thread else 0, []).append(c.value)
    if orphans:
        groups.setdefault(-1, []).extend(orphans)

    end = len(h.events)
    empty_inv = [h.inv(e) for e in empties]
    empty_res = [h.res(e) if h.res(e) is not None else end for e in empties]
    # no empty remove is longer than this, so a window's overlap search starts near its left edge
    longest = max((r - i for i, r in zip(empty_inv, empty_res)), default=0)

    for _, values in sorted(groups.items()):
        chunk: List[Value] = []
        size = 0
        pending: List[List[Value]] = []
        for v in values:
            n = len(calls_of[v])
            if chunk and (len(chunk) >= values_per_window or size + n > max_calls):
                pending.append(chunk)
                chunk, size = [], 0
            chunk.append(v)
            size += n
        if chunk:
            pending.append(chunk)
        for chunk in pending:
            ids = [c.id for v in chunk for c in calls_of[v]]
            budget = max_calls - len(ids)
            if budget > 0 and empties:
                lo = min(h.inv(h.call(i)) for i in ids)
                hi = max((h.res(h.call(i)) if h.res(h.call(i)) is not None else end) for i in ids)
                # empties invoked before hi whose response is after lo
                left = bisect.bisect_left(empty_inv, lo - longest)
                right = bisect.bisect_left(empty_inv, hi)
                cands = [empties[j] for j in range(left, right) if empty_res[j] > lo]
                if len(cands) > budget:
                    step = len(cands) / budget
                    cands = [cands[int(j * step)] for j in range(budget)]
                ids.extend(e.id for e in cands)
            yield project_calls(h, ids)


# -- run verification --------------------------------------------------------------------------------


@dataclass
class VerifyReport:
    structure: str
    windows: int = 0
    window_failures: List[Tuple[str, History, Verdict]] = field(default_factory=list)
    bound_skips: int = 0
    full_checks: Dict[str, Verdict] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.window_failures and all(v.holds for v in self.full_checks.values())

    def summary(self) -> str:
        lines = [f"{self.structure}: {self.windows} windows, {len(self.window_failures)} violations"]
        if self.bound_skips:
            lines.append(f"  {self.bound_skips} windows over the search bound")
        for name, v in self.full_checks.items():
            lines.append(f"  {name}: {v.outcome.value}" + (f" ({v.violation})" if v.violation else ""))
        for name, _, v in self.window_failures[:5]:
            lines.append(f"  window {name}: {v.violation}")
        return "\n".join(lines)


def checks_for(structure: str, k: int = 4) -> List[Tuple[str, str, Optional[SeqSpecKind]]]:
    """(label, condition, spec) window checks implied by a structure's guarantee."""
    mode, base = split_structure(structure)
    spec = spec_of(structure, k)
    if mode == "base":
        return [("lin", "lin", spec)]
    if mode == "lld":
        return [("loclin", "loclin", spec)]
    if mode == "llplusd":
        return [("lin-pool", "lin", SeqSpecKind.POOL), ("loclin", "loclin", spec)]
    # ll-kfifo / ll-kstack
    if base == "kfifo":
        return [("loclin-pool", "loclin", SeqSpecKind.POOL)]
    return [("loclin-stack", "loclin", SeqSpecKind.STACK)]


def verify_run(
    h: History,
    structure: str,
    k: int = 4,
    values_per_window: Optional[int] = None,
    max_calls: int = DEFAULT_BOUND,
) -> VerifyReport:
    rep = VerifyReport(structure)
    for label, condition, spec in checks_for(structure, k):
        local = condition == "loclin"
        per = values_per_window or (max_calls - 4) // 2
        for w in value_windows(h, per, by_thread=local, max_calls=max_calls):
            rep.windows += 1
            try:
                if local:
                    v = check_locally_linearizable(w, spec, bound=max_calls)
                else:
                    v = check_linearizable(w, spec, bound=max_calls)
            except BoundExceeded:
                rep.bound_skips += 1
                continue
            if not v.holds:
                rep.window_failures.append((label, w, v))
    rep.full_checks["pool-sanity"] = check_pool_sanity(h)
    if structure == "ll-kfifo":
        rep.full_checks["queue-order"] = check_queue_loclin_order(h)
    return rep
