from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from loclin.checkers import (
    BoundExceeded,
    Outcome,
    check_linearizable,
    check_locally_linearizable,
    check_pool_sanity,
    check_queue_lin_axiomatic,
    check_queue_loclin_axiomatic,
    check_queue_loclin_order,
    check_quiescently_consistent,
    check_sequentially_consistent,
    quiescent_blocks,
    run_condition,
)
from loclin.fixtures import INTERVALS, history_from_intervals
from loclin.gen import exhaustive, random_history
from loclin.history import History, OrphanMethod, precedence, project_object
from loclin.seqspec import SeqSpecKind, valid_sequence

P, Q, S, N = SeqSpecKind.POOL, SeqSpecKind.QUEUE, SeqSpecKind.STACK, SeqSpecKind.NEARLYQ
SPECS = [P, Q, S, N]


def holds(f, h, *args) -> bool:
    try:
        return f(h, *args).holds
    except OrphanMethod:
        return False


def small(seed: int, spec: SeqSpecKind, pending: float = 0.3, max_calls: int = 6) -> History:
    return random_history(random.Random(seed), spec, max_calls=max_calls, pending=pending)


seeds = st.integers(0, 2**32)
specs = st.sampled_from(SPECS)


# -- search engine against permutation oracles ------------------------------------------------


@settings(max_examples=400, deadline=None)
@given(seeds, specs)
def test_linearizable_matches_brute_force(seed, spec):
    h = small(seed, spec)
    v = check_linearizable(h, spec)
    assert v.holds == oracle.brute_linearizable(h, spec)
    if v.holds:
        # the witness is a valid sequence respecting precedence among its calls
        assert valid_sequence(v.witness, spec)
        pos = {c.id: i for i, c in enumerate(v.witness)}
        for a, b in precedence(h).pairs:
            if a in pos and b in pos:
                assert pos[a] < pos[b]


@settings(max_examples=300, deadline=None)
@given(seeds, specs)
def test_sequential_consistency_matches_brute_force(seed, spec):
    h = small(seed, spec)
    assert check_sequentially_consistent(h, spec).holds == oracle.brute_sequentially_consistent(h, spec)


@settings(max_examples=300, deadline=None)
@given(seeds, specs)
def test_quiescent_consistency_matches_brute_force(seed, spec):
    h = small(seed, spec)
    assert check_quiescently_consistent(h, spec).holds == oracle.brute_quiescently_consistent(h, spec)


@settings(max_examples=300, deadline=None)
@given(seeds, specs)
def test_local_linearizability_matches_brute_force(seed, spec):
    h = small(seed, spec)
    assert holds(check_locally_linearizable, h, spec) == oracle.brute_locally_linearizable(h, spec)


@settings(max_examples=500, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.4]))
def test_pool_sanity_matches_clause_oracle(seed, pending):
    h = random_history(random.Random(seed), P, max_calls=9, pending=pending, sequential_bias=0.5)
    assert check_pool_sanity(h).holds == oracle.brute_pool_sanity(h)


# -- axiomatic queue checkers --------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_axiomatic_queue_checkers_exhaustive_small(n):
    for h in exhaustive(n):
        assert holds(check_queue_lin_axiomatic, h) == holds(check_linearizable, h, Q)
        assert holds(check_queue_loclin_axiomatic, h) == holds(check_locally_linearizable, h, Q)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_linear_order_clause_matches_axiomatic(seed):
    h = small(seed, Q, pending=0.0, max_calls=9)
    try:
        ax = check_queue_loclin_axiomatic(h)
    except OrphanMethod:
        return
    pool = check_locally_linearizable(h, P)
    if pool.holds:
        assert check_queue_loclin_order(h).holds == ax.holds


# -- theorem-order properties ------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(seeds, st.sampled_from([P, Q, S]))
def test_linearizable_implies_locally_linearizable(seed, spec):
    h = small(seed, spec)
    if check_linearizable(h, spec).holds:
        assert check_locally_linearizable(h, spec).holds


@settings(max_examples=300, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.4]))
def test_local_pool_implies_sanity_and_qc(seed, pending):
    h = small(seed, P, pending=pending, max_calls=8)
    if holds(check_locally_linearizable, h, P):
        assert check_pool_sanity(h).holds
        assert check_quiescently_consistent(h, P).holds


def _spread_objects(h: History, rng: random.Random) -> History:
    obj = {c.id: rng.choice((1, 2)) for c in h.calls}
    return History.from_records(
        (ev.thread, ev.phase, ev.call.kind, ev.call.value, obj[ev.call.id]) for ev in h.events
    )


@settings(max_examples=300, deadline=None)
@given(seeds, st.sampled_from([P, Q, S]))
def test_compositionality_two_objects(seed, spec):
    rng = random.Random(seed)
    h = _spread_objects(random_history(rng, spec, max_calls=8, pending=0.2), rng)
    parts = [project_object(h, o) for o in sorted(h.objects())]
    assert check_linearizable(h, spec).holds == all(check_linearizable(p, spec).holds for p in parts)
    assert holds(check_locally_linearizable, h, spec) == all(
        holds(check_locally_linearizable, p, spec) for p in parts
    )


# -- examples ---------------------------------------------------------------------------------


def test_ll_not_lin_verdicts_and_witness():
    h = history_from_intervals(INTERVALS["ll-not-lin"])
    v = check_locally_linearizable(h, Q)
    assert v.outcome is Outcome.HOLDS and set(v.witnesses) == {1, 2}
    bad = check_linearizable(h, Q)
    assert not bad.holds and "not linearizable" in bad.describe()


def test_pool_sanity_clauses():
    dup = History.from_records(History.sequential([(1, "ins", 1), (1, "rem", 1)]).records()
                               + History.sequential([(2, "rem", 1)]).records(), strict_values=False)
    assert check_pool_sanity(dup).violation.clause == "duplicated value"
    thin = History.sequential([(1, "rem", 1), (1, "ins", 1)])
    assert check_pool_sanity(thin).violation.clause == "out-of-thin-air value"
    lost = History.sequential([(1, "ins", 1), (2, "rem", None), (2, "rem", 1)])
    assert check_pool_sanity(lost).violation.clause == "lost value"
    never = History.sequential([(1, "ins", 1), (2, "rem", None)])
    assert check_pool_sanity(never).violation.clause == "lost value"
    fine = History.sequential([(2, "rem", None), (1, "ins", 1), (2, "rem", 1)])
    assert check_pool_sanity(fine).holds


def test_quiescent_blocks():
    h = history_from_intervals([(1, "ins", 1, 0, 2), (2, "ins", 2, 1, 3), (1, "rem", 1, 4, 5)])
    blocks = quiescent_blocks(h)
    assert sorted(blocks.values()) == [0, 0, 1]


def test_bound_exceeded():
    h = History.sequential([(1, "ins", i) for i in range(1, 23)])
    with pytest.raises(BoundExceeded):
        check_linearizable(h, P)
    assert check_linearizable(h, P, bound=30).holds


def test_run_condition_dispatch():
    h = history_from_intervals(INTERVALS["ll-not-lin"])
    assert run_condition(h, "loclin", Q).holds
    assert not run_condition(h, "queue-lin-ax").holds
    assert run_condition(h, "pool-sanity").holds
    with pytest.raises(ValueError):
        run_condition(h, "lin")
    with pytest.raises(ValueError):
        run_condition(h, "bogus", Q)
