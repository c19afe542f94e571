"""Local linearizability: histories, checkers and locally linearizable containers."""

from __future__ import annotations

from .history import History, Kind, MethodCall, Phase, Value, parse_history, serialize_history
from .seqspec import SeqSpecKind, valid_sequence
from .checkers import (
    BoundExceeded,
    Outcome,
    Verdict,
    check_linearizable,
    check_locally_linearizable,
    check_pool_sanity,
    check_quiescently_consistent,
    check_queue_lin_axiomatic,
    check_queue_loclin_axiomatic,
    check_sequentially_consistent,
)

__version__ = "0.1.0"
