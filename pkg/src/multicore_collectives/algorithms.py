"""Schedule constructors for broadcast, gather and all-to-all.

Classic-model baselines (binomial broadcast and its time reversal) work on
the process-level graph. The rest target the extended model and work on the
machine graph, letting shared memory handle delivery inside a machine.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .model import (
    CLASSIC,
    EXTENDED,
    ROOT,
    Action,
    Assemble,
    ExternalTransfer,
    ModelKind,
    Problem,
    ProblemKind,
    RoundSchedule,
    Schedule,
    own_datum,
)
from .topology import ClusterTopology, Link, ProcessRef, degree


class DisconnectedError(ValueError):
    pass


def _require_connected(t: ClusterTopology) -> None:
    if not t.machine_graph_connected():
        raise DisconnectedError("machine graph is disconnected")


def _schedule(rounds: list[list[Action]]) -> Schedule:
    return Schedule(tuple(RoundSchedule(tuple(r)) for r in rounds))


def _process_neighbors(t: ClusterTopology, q: ProcessRef) -> list[ProcessRef]:
    local = [x for x in t.processes(q.machine) if x != q]
    remote = [x for m in sorted(t.neighbors(q.machine)) for x in t.processes(m)]
    return local + remote


def binomial_broadcast(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    """Classic doubling broadcast over the process-level graph.

    Each round every informed process forwards to one uninformed neighbour,
    nearest to the root first, lowest id on ties.
    """
    root = ProcessRef(*root)
    Problem.broadcast(root).check(t)
    _require_connected(t)
    dist = {root: 0}
    queue = [root]
    for q in queue:
        for n in _process_neighbors(t, q):
            if n not in dist:
                dist[n] = dist[q] + 1
                queue.append(n)
    informed = [root]
    known = {root}
    total = t.process_count
    rounds: list[list[Action]] = []
    while len(known) < total:
        actions: list[Action] = []
        targeted: list[ProcessRef] = []
        for s in informed:
            options = [n for n in _process_neighbors(t, s) if n not in known]
            if not options:
                continue
            target = min(options, key=lambda n: (dist[n], n))
            known.add(target)
            targeted.append(target)
            actions.append(ExternalTransfer(s, target, frozenset((ROOT,))))
        informed += targeted
        rounds.append(actions)
    return _schedule(rounds)


def hierarchical_broadcast(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    """Machine-as-node doubling: one external send per machine per round."""
    root = ProcessRef(*root)
    Problem.broadcast(root).check(t)
    _require_connected(t)
    dist = t.bfs_distances(root.machine)
    informed = [root.machine]
    known = {root.machine}
    rounds: list[list[Action]] = []
    while len(known) < t.machine_count:
        actions: list[Action] = []
        targeted = []
        for m in informed:
            options = [n for n in t.neighbors(m) if n not in known]
            if not options:
                continue
            n = min(options, key=lambda x: (dist[x], x))
            known.add(n)
            targeted.append(n)
            actions.append(ExternalTransfer(ProcessRef(m, 0), ProcessRef(n, 0), frozenset((ROOT,))))
        informed += targeted
        rounds.append(actions)
    return _schedule(rounds)


Priority = Callable[[ClusterTopology, set, int], tuple]


def _coverage_priority(t: ClusterTopology, informed: set, n: int) -> tuple:
    # Prefer targets that open up machines nothing informed can reach yet.
    reach = set(informed)
    for m in informed:
        reach |= t.neighbors(m)
    return (-len(t.neighbors(n) - reach), n)


def _degree_priority(t: ClusterTopology, informed: set, n: int) -> tuple:
    return (-degree(t, n), n)


def _degree_limited_rounds(t: ClusterTopology, source: int, priority: Priority) -> list[list[tuple[int, int]]]:
    """Machine-level (sender, receiver) pairs per round.

    Every informed machine may send on up to ``degree`` links per round.
    Targets are admitted in priority order whenever an augmenting path can
    fit them, so each round informs as many machines as possible and, among
    maximum sets, the best-ranked ones.
    """
    informed = {source}
    rounds: list[list[tuple[int, int]]] = []
    while len(informed) < t.machine_count:
        capacity = {m: degree(t, m) for m in informed}
        frontier = sorted(
            {n for m in informed for n in t.neighbors(m) if n not in informed},
            key=lambda n: priority(t, informed, n),
        )
        sender_of: dict[int, int] = {}
        load: Counter[int] = Counter()

        def augment(n: int, seen: set[int]) -> bool:
            senders = sorted(m for m in t.neighbors(n) if m in informed)
            for m in senders:
                if m in seen:
                    continue
                seen.add(m)
                if load[m] < capacity[m]:
                    sender_of[n] = m
                    load[m] += 1
                    return True
                for other in sorted(x for x, s in sender_of.items() if s == m):
                    load[m] -= 1
                    del sender_of[other]
                    if augment(other, seen):
                        sender_of[n] = m
                        load[m] += 1
                        return True
                    sender_of[other] = m
                    load[m] += 1
            return False

        for n in frontier:
            augment(n, set())
        pairs = sorted((m, n) for n, m in sender_of.items())
        rounds.append(pairs)
        informed |= set(sender_of)
    return rounds


def _materialize_broadcast(rounds: list[list[tuple[int, int]]]) -> Schedule:
    out: list[list[Action]] = []
    for pairs in rounds:
        used: Counter[int] = Counter()
        actions: list[Action] = []
        for m, n in pairs:
            actions.append(ExternalTransfer(ProcessRef(m, used[m]), ProcessRef(n, 0), frozenset((ROOT,))))
            used[m] += 1
        out.append(actions)
    return _schedule(out)


def multicore_greedy_broadcast(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    root = ProcessRef(*root)
    Problem.broadcast(root).check(t)
    _require_connected(t)
    return _materialize_broadcast(_degree_limited_rounds(t, root.machine, _coverage_priority))


def highest_degree_first_broadcast(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    """Degree-limited broadcast that ranks targets by their own degree only.

    Ranking is recomputed every round and ignores how much the targets'
    neighbourhoods overlap.
    """
    root = ProcessRef(*root)
    Problem.broadcast(root).check(t)
    _require_connected(t)
    return _materialize_broadcast(_degree_limited_rounds(t, root.machine, _degree_priority))


def invert_schedule(s: Schedule, p: Problem) -> Schedule:
    """Time-reverse a broadcast schedule into a gather schedule.

    Transfer directions flip; each payload is whatever the new sender has
    accumulated by then (its own contribution plus everything received).
    The result is not guaranteed to be valid under either model.
    """
    if p.kind is not ProblemKind.BROADCAST:
        raise ValueError("invert_schedule needs a broadcast problem")
    for a in s.transfers():
        if a.payload != frozenset((ROOT,)):
            raise ValueError("not a broadcast schedule: payload other than the root datum")
    acc: dict[ProcessRef, frozenset] = {}

    def held(q: ProcessRef) -> frozenset:
        return acc.setdefault(q, frozenset((own_datum(q),)))

    rounds: list[list[Action]] = []
    for rnd in reversed(s.rounds):
        flipped = [(a.receiver, a.sender) for a in rnd.actions if isinstance(a, ExternalTransfer)]
        actions: list[Action] = [ExternalTransfer(snd, rcv, held(snd)) for snd, rcv in flipped]
        for a in actions:
            acc[a.receiver] = held(a.receiver) | a.payload
        rounds.append(actions)
    return _schedule(rounds)


def inverse_binomial_gather(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    root = ProcessRef(*root)
    return invert_schedule(binomial_broadcast(t, root), Problem.broadcast(root))


def multicore_gather(t: ClusterTopology, root: tuple[int, int] = (0, 0)) -> Schedule:
    """Greedy convergecast over a BFS tree of machines, overlapping assembly.

    Per round: first the children whose whole subtree fits in one message
    send (deepest first), then any child with something new sends a partial
    message if both ends still have capacity; every process left idle on a
    multi-process machine assembles its own contribution.
    """
    root = ProcessRef(*root)
    Problem.gather(root).check(t)
    _require_connected(t)
    r_machine = root.machine
    dist = t.bfs_distances(r_machine)
    parent = {m: min(n for n in t.neighbors(m) if dist[n] == dist[m] - 1) for m in dist if m != r_machine}
    subtree: dict[int, set] = {m.id: {own_datum(q) for q in t.processes(m.id)} for m in t.machines}
    for m in sorted(parent, key=lambda x: -dist[x]):
        subtree[parent[m]] |= subtree[m]
    needed = {own_datum(q) for q in t.processes()} - {own_datum(root)}
    order = sorted(parent, key=lambda m: (-dist[m], m))

    shared: dict[int, set] = {m.id: set() for m in t.machines}
    published: set = set()
    rounds: list[list[Action]] = []
    while not needed <= shared[r_machine]:
        capacity = {m.id: degree(t, m.id) for m in t.machines}
        free = {m.id: list(t.processes(m.id)) for m in t.machines}
        actions: list[Action] = []
        sent: set[int] = set()
        for final_only in (True, False):
            for m in order:
                up = parent[m]
                if m in sent or not capacity[m] or not capacity[up]:
                    continue
                unpublished = [q for q in free[m] if own_datum(q) not in published]
                candidates = unpublished or free[m]
                if not candidates:
                    continue
                sender = candidates[0]
                payload = shared[m] - shared[up]
                if own_datum(sender) not in published:
                    payload = payload | {own_datum(sender)}
                if not payload:
                    continue
                if final_only and subtree[m] - shared[up] - payload:
                    continue
                receivers = sorted(
                    free[up], key=lambda q: (q != root and own_datum(q) not in published, q.index)
                )
                if not receivers:
                    continue
                receiver = receivers[0]
                actions.append(ExternalTransfer(sender, receiver, frozenset(payload)))
                free[m].remove(sender)
                free[up].remove(receiver)
                capacity[m] -= 1
                capacity[up] -= 1
                sent.add(m)
        for spec in t.machines:
            if spec.process_count < 2:
                continue
            for q in free[spec.id]:
                if q != root and own_datum(q) not in published:
                    actions.append(Assemble(q, own_datum(q)))
        for a in actions:
            if isinstance(a, ExternalTransfer):
                shared[a.receiver.machine] |= a.payload
                shared[a.sender.machine] |= a.payload
                if own_datum(a.sender) in a.payload:
                    published.add(own_datum(a.sender))
            else:
                shared[a.process.machine].add(a.datum)
                published.add(a.datum)
        rounds.append(actions)
    return _schedule(rounds)


def naive_all_to_all(t: ClusterTopology) -> Schedule:
    """Each machine assembles locally, then broadcasts its aggregate.

    Aggregates go out one source machine at a time using the degree-limited
    greedy broadcast; each transfer is placed in the earliest round where its
    sender already holds the aggregate and both machines, the link and a
    process on each side are free.
    """
    _require_connected(t)
    multi = {m.id: m.process_count > 1 for m in t.machines}
    offset = 1 if any(multi.values()) else 0
    rounds: list[list[Action]] = []
    busy: list[set[ProcessRef]] = []
    load: list[Counter[int]] = []
    links: list[set[Link]] = []

    def ensure(r: int) -> None:
        while len(rounds) <= r:
            rounds.append([])
            busy.append(set())
            load.append(Counter())
            links.append(set())

    if offset:
        ensure(0)
        for q in t.processes():
            if multi[q.machine]:
                rounds[0].append(Assemble(q, own_datum(q)))
                busy[0].add(q)

    def free_process(r: int, m: int) -> ProcessRef | None:
        return next((q for q in t.processes(m) if q not in busy[r]), None)

    def fits(r: int, m: int, n: int) -> bool:
        ensure(r)
        return (
            load[r][m] < degree(t, m)
            and load[r][n] < degree(t, n)
            and Link(m, n) not in links[r]
            and free_process(r, m) is not None
            and free_process(r, n) is not None
        )

    if t.machine_count > 1:
        for source in range(t.machine_count):
            payload = frozenset(own_datum(q) for q in t.processes(source))
            ready = {source: offset if multi[source] else 0}
            for pairs in _degree_limited_rounds(t, source, _coverage_priority):
                for m, n in pairs:
                    r = ready[m]
                    while not fits(r, m, n):
                        r += 1
                    sender, receiver = free_process(r, m), free_process(r, n)
                    rounds[r].append(ExternalTransfer(sender, receiver, payload))
                    busy[r].update((sender, receiver))
                    load[r][m] += 1
                    load[r][n] += 1
                    links[r].add(Link(m, n))
                    ready[n] = r + 1
    return _schedule(rounds)


class AlgorithmId(Enum):
    BINOMIAL_BROADCAST = "binomial-broadcast"
    HIERARCHICAL_BROADCAST = "hierarchical-broadcast"
    MULTICORE_GREEDY_BROADCAST = "multicore-greedy-broadcast"
    HIGHEST_DEGREE_FIRST_BROADCAST = "highest-degree-first-broadcast"
    INVERSE_BINOMIAL_GATHER = "inverse-binomial-gather"
    MULTICORE_GATHER = "multicore-gather"
    NAIVE_ALL_TO_ALL = "naive-all-to-all"


@dataclass(frozen=True)
class AlgorithmInfo:
    build: Callable[..., Schedule]
    problem: ProblemKind
    model: ModelKind


ALGORITHMS: dict[AlgorithmId, AlgorithmInfo] = {
    AlgorithmId.BINOMIAL_BROADCAST: AlgorithmInfo(binomial_broadcast, ProblemKind.BROADCAST, CLASSIC),
    AlgorithmId.HIERARCHICAL_BROADCAST: AlgorithmInfo(hierarchical_broadcast, ProblemKind.BROADCAST, EXTENDED),
    AlgorithmId.MULTICORE_GREEDY_BROADCAST: AlgorithmInfo(
        multicore_greedy_broadcast, ProblemKind.BROADCAST, EXTENDED
    ),
    AlgorithmId.HIGHEST_DEGREE_FIRST_BROADCAST: AlgorithmInfo(
        highest_degree_first_broadcast, ProblemKind.BROADCAST, EXTENDED
    ),
    AlgorithmId.INVERSE_BINOMIAL_GATHER: AlgorithmInfo(inverse_binomial_gather, ProblemKind.GATHER, CLASSIC),
    AlgorithmId.MULTICORE_GATHER: AlgorithmInfo(multicore_gather, ProblemKind.GATHER, EXTENDED),
    AlgorithmId.NAIVE_ALL_TO_ALL: AlgorithmInfo(naive_all_to_all, ProblemKind.ALL_TO_ALL, EXTENDED),
}


def build_schedule(algorithm: AlgorithmId | str, t: ClusterTopology, p: Problem) -> Schedule:
    algorithm = AlgorithmId(algorithm)
    info = ALGORITHMS[algorithm]
    if info.problem is not p.kind:
        raise ValueError(f"{algorithm.value} solves {info.problem.value}, not {p.kind.value}")
    if p.kind is ProblemKind.ALL_TO_ALL:
        return info.build(t)
    return info.build(t, p.root)
