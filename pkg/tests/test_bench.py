from __future__ import annotations

import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loclin.bench import (
    CSV_HEADER,
    INS,
    REM,
    REM_EMPTY,
    STRUCTURES,
    WORKLOADS,
    BufferFull,
    ConfigInvalid,
    ThreadLog,
    WorkloadConfig,
    checks_for,
    merge_logs,
    run_workload,
    spec_of,
    split_structure,
    value_windows,
    verify_run,
    write_history,
)
from loclin.checkers import check_linearizable
from loclin.gen import random_history
from loclin.history import Kind, Value, parse_history
from loclin.seqspec import SeqSpecKind


def test_split_and_spec():
    assert split_structure("ms") == ("base", "ms")
    assert split_structure("llplusd-treiber") == ("llplusd", "treiber")
    assert split_structure("ll-kstack") == ("ll", "kstack")
    assert spec_of("lld-ms") is SeqSpecKind.QUEUE
    assert spec_of("kstack", k=1) is SeqSpecKind.STACK
    assert spec_of("lld-kfifo", k=4) is SeqSpecKind.POOL
    with pytest.raises(ConfigInvalid):
        split_structure("lcrq")


@pytest.mark.parametrize(
    "changes",
    [
        {"threads": 3},
        {"threads": 0},
        {"ops": 0},
        {"k": 0},
        {"delay_ns": -1},
        {"workload": "burst"},
        {"structure": "ts-stack"},
        {"threads": 200, "workload": "seqalt"},
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigInvalid):
        WorkloadConfig(**changes).validate()


def test_merge_logs_ties_overlap_and_empty_versions():
    a, b = ThreadLog(8), ThreadLog(8)
    a.log(10, 20, INS, 1)
    b.log(20, 30, REM, 1)  # invoked at the insert's response time: overlap
    a.log(25, 26, REM_EMPTY, 0)
    b.log(40, 50, REM_EMPTY, 0)
    h = merge_logs([a, b])
    ins, rem, e1, e2 = sorted(h.calls, key=lambda c: h.inv(c))
    assert not h.precedes(ins, rem)
    assert [e1.value, e2.value] == [Value(None, 0), Value(None, 1)]


def test_thread_log_capacity():
    log = ThreadLog(2)
    log.log(0, 1, INS, 1)
    with pytest.raises(BufferFull):
        log.log(2, 3, INS, 2)


@pytest.mark.parametrize("workload", WORKLOADS)
@pytest.mark.parametrize("structure", STRUCTURES)
def test_small_runs_conserve_and_verify(structure, workload):
    cfg = WorkloadConfig(structure=structure, workload=workload, threads=4, ops=150, delay_ns=0,
                         seed=3, record=True, switch_interval_s=1e-5, audit=structure.startswith("ll-"))
    rep = run_workload(cfg)
    assert rep.conserved
    assert rep.total_ops == sum(rep.per_thread)
    assert not rep.audit_repeats
    h = rep.history
    assert len([c for c in h.calls if c.kind is Kind.INS]) == rep.inserted
    v = verify_run(h, structure, cfg.k)
    assert v.ok, v.summary()


def test_csv_and_history_file(tmp_path):
    cfg = WorkloadConfig(structure="lld-treiber", threads=2, ops=50, seed=1, record=True)
    rep = run_workload(cfg)
    row = rep.csv_row().split(",")
    assert len(row) == len(CSV_HEADER.split(","))
    assert row[:2] == ["treiber", "lld"]
    path = tmp_path / "run.hist"
    write_history(rep, path)
    assert parse_history(path.read_text()) == rep.history


def test_relaxed_queue_windows_expose_reordering():
    cfg = WorkloadConfig(structure="kfifo", k=4, threads=4, ops=400, delay_ns=0, seed=2,
                         record=True, switch_interval_s=1e-5)
    h = run_workload(cfg).history
    bad = sum(not check_linearizable(w, SeqSpecKind.QUEUE).holds
              for w in value_windows(h, 8, by_thread=False))
    assert bad > 0


def test_checks_for_structures():
    assert [c[0] for c in checks_for("llplusd-ms")] == ["lin-pool", "loclin"]
    assert checks_for("ll-kstack")[0][2] is SeqSpecKind.STACK
    assert checks_for("kfifo", k=1)[0][2] is SeqSpecKind.QUEUE


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4), st.booleans())
def test_windows_are_value_closed_and_cover(seed, per, by_thread):
    h = random_history(random.Random(seed), SeqSpecKind.POOL, max_calls=14, pending=0.2)
    seen = Counter()
    for w in value_windows(h, per, by_thread=by_thread, max_calls=10):
        assert len(w.calls) <= 10
        values = {c.value for c in w.calls if not c.value.is_empty}
        for v in values:
            assert {c.id for c in w.calls if c.value == v} == {c.id for c in h.calls if c.value == v}
        seen.update(values)
    assert set(seen) == {c.value for c in h.calls if not c.value.is_empty}
    assert all(n == 1 for n in seen.values())
