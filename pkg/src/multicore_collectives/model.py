"""Problems, schedules and the round semantics of the two telephone models.

Classic model: the cluster is expanded to a process-level graph (each machine
a clique, every process pair across a machine link joined by an edge) and each
process takes part in at most one transfer per round.

Extended model: a machine is a shared-memory node. Anything received (or
assembled) on a machine is held by all of its processes at the end of the
round, a contribution must be assembled by its origin before anyone else may
forward it, and a machine can drive up to ``degree`` external transfers in
parallel, sends and receives counted together, one message per link.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, NamedTuple, Union

from .topology import ClusterTopology, Link, ProcessRef, degree


class ProblemKind(Enum):
    BROADCAST = "broadcast"
    GATHER = "gather"
    ALL_TO_ALL = "all-to-all"


class ModelKind(Enum):
    CLASSIC = "classic"
    EXTENDED = "extended"


CLASSIC = ModelKind.CLASSIC
EXTENDED = ModelKind.EXTENDED


class Datum(NamedTuple):
    """A piece of information: the broadcast token, or one process's contribution."""

    machine: int
    index: int

    @property
    def is_root(self) -> bool:
        return self.machine < 0

    @property
    def origin(self) -> ProcessRef | None:
        return None if self.is_root else ProcessRef(self.machine, self.index)

    def __str__(self) -> str:
        return "root" if self.is_root else f"d{self.machine}.{self.index}"


ROOT = Datum(-1, -1)


def own_datum(p: ProcessRef) -> Datum:
    return Datum(p.machine, p.index)


@dataclass(frozen=True)
class Problem:
    kind: ProblemKind
    root: ProcessRef | None = None

    def __post_init__(self) -> None:
        if self.root is not None:
            object.__setattr__(self, "root", ProcessRef(*self.root))

    @classmethod
    def broadcast(cls, root: tuple[int, int] = (0, 0)) -> Problem:
        return cls(ProblemKind.BROADCAST, ProcessRef(*root))

    @classmethod
    def gather(cls, root: tuple[int, int] = (0, 0)) -> Problem:
        return cls(ProblemKind.GATHER, ProcessRef(*root))

    @classmethod
    def all_to_all(cls) -> Problem:
        return cls(ProblemKind.ALL_TO_ALL)

    def check(self, t: ClusterTopology) -> None:
        if self.kind is ProblemKind.ALL_TO_ALL:
            if self.root is not None:
                raise ValueError("all-to-all takes no root")
            return
        if self.root is None:
            raise ValueError(f"{self.kind.value} needs a root process")
        if not t.has_process(self.root):
            raise ValueError(f"invalid root {self.root}: no such process")

    def data(self, t: ClusterTopology) -> list[Datum]:
        if self.kind is ProblemKind.BROADCAST:
            return [ROOT]
        return [own_datum(p) for p in t.processes()]

    def origin_of(self, d: Datum) -> ProcessRef | None:
        return self.root if d.is_root else d.origin

    def owns(self, p: ProcessRef) -> Datum | None:
        """The contribution process ``p`` originates, if the problem has one."""
        return None if self.kind is ProblemKind.BROADCAST else own_datum(p)


def _payload(items: Iterable[Datum]) -> frozenset[Datum]:
    return frozenset(Datum(*d) for d in items)


@dataclass(frozen=True)
class ExternalTransfer:
    """``sender`` ships ``payload`` to ``receiver``.

    Under the classic model the two may share a machine (a clique edge).
    """

    sender: ProcessRef
    receiver: ProcessRef
    payload: frozenset[Datum]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sender", ProcessRef(*self.sender))
        object.__setattr__(self, "receiver", ProcessRef(*self.receiver))
        object.__setattr__(self, "payload", _payload(self.payload))

    @property
    def participants(self) -> tuple[ProcessRef, ...]:
        return (self.sender, self.receiver)

    @property
    def is_external(self) -> bool:
        return self.sender.machine != self.receiver.machine


@dataclass(frozen=True)
class Assemble:
    process: ProcessRef
    datum: Datum

    def __post_init__(self) -> None:
        object.__setattr__(self, "process", ProcessRef(*self.process))
        object.__setattr__(self, "datum", Datum(*self.datum))

    @property
    def participants(self) -> tuple[ProcessRef, ...]:
        return (self.process,)


@dataclass(frozen=True)
class LocalWrite:
    writer: ProcessRef
    payload: frozenset[Datum]

    def __post_init__(self) -> None:
        object.__setattr__(self, "writer", ProcessRef(*self.writer))
        object.__setattr__(self, "payload", _payload(self.payload))

    @property
    def participants(self) -> tuple[ProcessRef, ...]:
        return (self.writer,)


Action = Union[ExternalTransfer, Assemble, LocalWrite]


@dataclass(frozen=True)
class RoundSchedule:
    actions: tuple[Action, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class Schedule:
    rounds: tuple[RoundSchedule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "rounds",
            tuple(r if isinstance(r, RoundSchedule) else RoundSchedule(tuple(r)) for r in self.rounds),
        )

    def __len__(self) -> int:
        return len(self.rounds)

    def __iter__(self) -> Iterator[RoundSchedule]:
        return iter(self.rounds)

    def actions(self) -> Iterator[Action]:
        for rnd in self.rounds:
            yield from rnd.actions

    def transfers(self) -> Iterator[ExternalTransfer]:
        return (a for a in self.actions() if isinstance(a, ExternalTransfer))


@dataclass(frozen=True)
class KnowledgeState:
    holds: Mapping[ProcessRef, frozenset[Datum]]
    assembled: frozenset[Datum] = frozenset()

    __hash__ = None  # type: ignore[assignment]


class Violation(NamedTuple):
    round: int
    description: str

    def __str__(self) -> str:
        return f"round {self.round}: {self.description}"


class RoundViolation(Exception):
    """A round broke one or more model constraints; the state did not advance."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


def initial_state(t: ClusterTopology, p: Problem, model: ModelKind = EXTENDED) -> KnowledgeState:
    p.check(t)
    if p.kind is ProblemKind.BROADCAST:
        informed = set(t.processes(p.root.machine)) if model is EXTENDED else {p.root}
        holds = {q: (frozenset((ROOT,)) if q in informed else frozenset()) for q in t.processes()}
        return KnowledgeState(holds, frozenset((ROOT,)))
    return KnowledgeState({q: frozenset((own_datum(q),)) for q in t.processes()}, frozenset())


def apply_round(
    t: ClusterTopology,
    p: Problem,
    state: KnowledgeState,
    rnd: RoundSchedule | Iterable[Action],
    model: ModelKind = EXTENDED,
    round_index: int = 0,
) -> KnowledgeState:
    """Apply one round of simultaneous actions.

    Raises RoundViolation listing every broken constraint; all checks read the
    start-of-round state.
    """
    actions = rnd.actions if isinstance(rnd, RoundSchedule) else tuple(rnd)
    extended = model is EXTENDED
    holds = state.holds
    assembled = state.assembled
    valid_data = set(p.data(t))
    violations: list[Violation] = []

    def bad(msg: str) -> None:
        violations.append(Violation(round_index, msg))

    usage: Counter[ProcessRef] = Counter()
    link_use: Counter[Link] = Counter()
    machine_use: Counter[int] = Counter()

    def check_data(who: ProcessRef, payload: frozenset[Datum], verb: str) -> None:
        if not payload:
            bad(f"{verb} by {who}: empty payload")
        held = holds.get(who, frozenset())
        for d in sorted(payload):
            if d not in valid_data:
                bad(f"{verb} by {who}: unknown datum {d}")
            elif d not in held:
                note = ""
                if extended and d not in assembled and p.origin_of(d) != who:
                    note = " (not yet assembled by its origin)"
                bad(f"{verb} by {who}: does not hold {d}{note}")
            elif extended and d not in assembled and p.origin_of(d) != who:
                bad(f"{verb} by {who}: {d} not assembled by its origin")

    for action in actions:
        missing = [q for q in action.participants if not t.has_process(q)]
        if missing:
            bad(f"{_describe(action)}: unknown process {', '.join(map(str, missing))}")
            continue
        usage.update(action.participants)
        if isinstance(action, ExternalTransfer):
            s, r = action.sender, action.receiver
            if s == r:
                bad(f"{_describe(action)}: sender and receiver are the same process")
            elif s.machine == r.machine:
                if extended:
                    bad(f"{_describe(action)}: intra-machine transfer (shared memory propagates locally for free)")
            elif not t.linked(s.machine, r.machine):
                bad(f"{_describe(action)}: machines {s.machine} and {r.machine} are not linked")
            else:
                link_use[Link(s.machine, r.machine)] += 1
                machine_use[s.machine] += 1
                machine_use[r.machine] += 1
            check_data(s, action.payload, "transfer")
        elif isinstance(action, Assemble):
            if not extended:
                bad(f"{_describe(action)}: Assemble is not part of the classic model")
            elif action.datum not in valid_data:
                bad(f"{_describe(action)}: unknown datum {action.datum}")
            elif p.origin_of(action.datum) != action.process:
                bad(f"{_describe(action)}: {action.datum} does not originate at {action.process}")
        else:
            if not extended:
                bad(f"{_describe(action)}: LocalWrite is not part of the classic model")
            else:
                check_data(action.writer, action.payload, "write")

    for q, n in sorted(usage.items()):
        if n > 1:
            bad(f"process {q} takes part in {n} actions")
    if extended:
        for link, n in sorted(link_use.items(), key=lambda kv: (kv[0].a, kv[0].b)):
            if n > 1:
                bad(f"link {link.a}-{link.b} carries {n} messages")
        for m, n in sorted(machine_use.items()):
            cap = degree(t, m)
            if n > cap:
                bad(f"machine {m}: {n} external transfers exceed degree {cap}")
    if violations:
        raise RoundViolation(violations)
    return advance_round(t, p, state, actions, model)


def advance_round(
    t: ClusterTopology,
    p: Problem,
    state: KnowledgeState,
    actions: Iterable[Action],
    model: ModelKind = EXTENDED,
) -> KnowledgeState:
    """Effect of a round already known to be legal (no checks)."""
    extended = model is EXTENDED
    new_holds = dict(state.holds)
    new_assembled = set(state.assembled)
    if not extended:
        for action in actions:
            new_holds[action.receiver] = new_holds[action.receiver] | action.payload
        return KnowledgeState(new_holds, frozenset(new_assembled))

    published: dict[int, set[Datum]] = {}
    for action in actions:
        if isinstance(action, ExternalTransfer):
            published.setdefault(action.receiver.machine, set()).update(action.payload)
            published.setdefault(action.sender.machine, set()).update(action.payload)
            mine = p.owns(action.sender)
            if mine in action.payload:
                new_assembled.add(mine)
        elif isinstance(action, Assemble):
            published.setdefault(action.process.machine, set()).add(action.datum)
            new_assembled.add(action.datum)
        else:
            published.setdefault(action.writer.machine, set()).update(action.payload)
            mine = p.owns(action.writer)
            if mine in action.payload:
                new_assembled.add(mine)
    for m, data in published.items():
        for q in t.processes(m):
            new_holds[q] = new_holds[q] | data
    return KnowledgeState(new_holds, frozenset(new_assembled))


def _describe(action: Action) -> str:
    if isinstance(action, ExternalTransfer):
        return f"transfer {action.sender} -> {action.receiver}"
    if isinstance(action, Assemble):
        return f"assemble {action.process} {action.datum}"
    return f"write {action.writer}"


def is_complete(p: Problem, state: KnowledgeState) -> bool:
    holds = state.holds
    if p.kind is ProblemKind.BROADCAST:
        return all(ROOT in h for h in holds.values())
    everything = {own_datum(q) for q in holds}
    if p.kind is ProblemKind.GATHER:
        return everything <= holds[p.root]
    return all(everything <= h for h in holds.values())


@dataclass
class ValidationReport:
    valid: bool
    completed: bool
    rounds_used: int
    external_messages: int
    violations: list[Violation] = field(default_factory=list)
    max_nic_utilization: dict[int, float] = field(default_factory=dict)


def run_schedule(t: ClusterTopology, p: Problem, s: Schedule, model: ModelKind = EXTENDED) -> ValidationReport:
    """Replay ``s`` and report; invalid schedules are reported, never raised.

    Replay stops at the first round that violates the model: later rounds
    would be judged against a state the schedule never reached.
    """
    state = initial_state(t, p, model)
    violations: list[Violation] = []
    utilization = {m.id: 0.0 for m in t.machines}
    for k, rnd in enumerate(s.rounds):
        try:
            state = apply_round(t, p, state, rnd, model, k)
        except RoundViolation as err:
            violations = err.violations
            break
        used: Counter[int] = Counter()
        for a in rnd.actions:
            if isinstance(a, ExternalTransfer) and a.is_external:
                used[a.sender.machine] += 1
                used[a.receiver.machine] += 1
        for m, n in used.items():
            cap = degree(t, m)
            utilization[m] = max(utilization[m], n / cap if cap else 0.0)
    external = sum(1 for a in s.transfers() if a.is_external)
    return ValidationReport(
        valid=not violations,
        completed=not violations and is_complete(p, state),
        rounds_used=len(s.rounds),
        external_messages=external,
        violations=violations,
        max_nic_utilization=utilization,
    )


def final_state(t: ClusterTopology, p: Problem, s: Schedule, model: ModelKind = EXTENDED) -> KnowledgeState:
    """State after replaying a schedule; raises RoundViolation on the first bad round."""
    state = initial_state(t, p, model)
    for k, rnd in enumerate(s.rounds):
        state = apply_round(t, p, state, rnd, model, k)
    return state


def classic_to_extended(t: ClusterTopology, p: Problem, s: Schedule) -> Schedule:
    """Translate a classic-model schedule for the extended model.

    Clique transfers disappear (shared memory propagates for free); one that
    carried the sender's own contribution becomes an Assemble of it, which
    publishes that contribution on the same round. External transfers are kept.
    """
    rounds = []
    for rnd in s.rounds:
        actions: list[Action] = []
        for a in rnd.actions:
            if not isinstance(a, ExternalTransfer) or a.is_external:
                actions.append(a)
                continue
            mine = p.owns(a.sender)
            if mine is not None and mine in a.payload:
                actions.append(Assemble(a.sender, mine))
        rounds.append(RoundSchedule(tuple(actions)))
    return Schedule(tuple(rounds))
