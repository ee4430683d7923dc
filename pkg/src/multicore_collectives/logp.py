"""Continuous-time LogP evaluation of a transfer-only schedule.

The network is flat: topology is ignored. A transfer starts once its sender
holds the whole payload and the sender's previous send started at least
max(o_send, g) earlier; it arrives o_send + L + o_recv after it starts.
Receiver contention is not modelled beyond o_recv.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Assemble, ExternalTransfer, LocalWrite, Schedule


@dataclass(frozen=True)
class LogPParams:
    L: float
    o_send: float
    o_recv: float
    g: float

    def __post_init__(self) -> None:
        for name in ("L", "o_send", "o_recv", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"LogP parameter {name} must be >= 0")


def logp_time(s: Schedule, params: LogPParams) -> float:
    """Completion time (last arrival) of ``s`` under LogP.

    Transfers are timed in schedule order. A datum a process never receives
    is taken to be held from time 0.
    """
    pace = max(params.o_send, params.g)
    arrival_cost = params.o_send + params.L + params.o_recv
    available: dict[tuple, float] = {}
    last_send: dict = {}
    finish = 0.0
    for rnd in s.rounds:
        timed = []
        for a in rnd.actions:
            if isinstance(a, (Assemble, LocalWrite)):
                raise ValueError("LogP has no shared memory: Assemble/LocalWrite are not allowed")
            assert isinstance(a, ExternalTransfer)
            ready = max((available.get((a.sender, d), 0.0) for d in a.payload), default=0.0)
            if a.sender in last_send:
                ready = max(ready, last_send[a.sender] + pace)
            last_send[a.sender] = ready
            timed.append((a, ready + arrival_cost))
        # Arrivals of one round only feed later rounds.
        for a, arrive in timed:
            for d in a.payload:
                key = (a.receiver, d)
                available[key] = min(available.get(key, arrive), arrive)
            finish = max(finish, arrive)
    return finish
