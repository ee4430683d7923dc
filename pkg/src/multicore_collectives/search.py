"""Exhaustive optimal-schedule search for small instances.

Breadth-first over rounds. Each round is one *maximal* set of simultaneously
legal, useful actions: knowledge only grows, so adding a legal action to a
round never hurts, and a non-maximal round is weakly dominated by a maximal
superset of it. States are deduplicated by canonical key, and a state is
dropped when an already kept state knows at least as much.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator

from .canonical import Canonicalizer
from .model import (
    CLASSIC,
    EXTENDED,
    Action,
    Assemble,
    ExternalTransfer,
    KnowledgeState,
    ModelKind,
    Problem,
    ProblemKind,
    RoundSchedule,
    Schedule,
    advance_round,
    initial_state,
    is_complete,
    own_datum,
)
from .topology import ClusterTopology, Link, ProcessRef, degree


@dataclass(frozen=True)
class SearchBudget:
    max_rounds: int = 12
    max_states: int = 500_000
    time_limit: float = 300.0

    def __post_init__(self) -> None:
        if self.max_rounds <= 0 or self.max_states <= 0 or self.time_limit <= 0:
            raise ValueError("search budget values must be positive")


@dataclass
class SearchResult:
    optimal_rounds: int | None
    witness: Schedule | None
    states_explored: int
    reason: str = ""

    @property
    def exhausted(self) -> bool:
        return self.optimal_rounds is None


def _relevant(t: ClusterTopology, p: Problem) -> frozenset:
    data = set(p.data(t))
    if p.kind is ProblemKind.GATHER:
        data.discard(own_datum(p.root))
    return frozenset(data)


def _classic_round_sets(t: ClusterTopology, p: Problem, state: KnowledgeState) -> Iterator[tuple[Action, ...]]:
    relevant = _relevant(t, p)
    procs = t.processes()
    index = {q: i for i, q in enumerate(procs)}
    holds = state.holds
    options: list[list[tuple[int, ExternalTransfer]]] = [[] for _ in procs]
    edges: list[tuple[int, int]] = []
    for s in procs:
        offer = holds[s] & relevant
        if not offer:
            continue
        peers = [x for x in t.processes(s.machine) if x != s]
        peers += [x for m in sorted(t.neighbors(s.machine)) for x in t.processes(m)]
        for r in peers:
            if offer - holds[r]:
                a = ExternalTransfer(s, r, holds[s])
                i, j = index[s], index[r]
                options[min(i, j)].append((max(i, j), a))
                edges.append((i, j))
    n = len(procs)
    used = [False] * n
    chosen: list[ExternalTransfer] = []

    def rec(i: int) -> Iterator[tuple[Action, ...]]:
        while i < n and used[i]:
            i += 1
        if i == n:
            if all(used[a] or used[b] for a, b in edges):
                yield tuple(chosen)
            return
        used[i] = True
        for j, a in options[i]:
            if not used[j]:
                used[j] = True
                chosen.append(a)
                yield from rec(i + 1)
                chosen.pop()
                used[j] = False
        used[i] = False
        # Leave i idle; any idle partner of an earlier idle vertex is caught at the leaf.
        yield from rec(i + 1)

    yield from rec(0)


@dataclass
class _Klass:
    machine: int
    kind: str  # "all" (broadcast), "root", "fresh" (unpublished), "done" (published)
    members: list[ProcessRef] = field(default_factory=list)


def _extended_round_sets(t: ClusterTopology, p: Problem, state: KnowledgeState) -> Iterator[tuple[Action, ...]]:
    relevant = _relevant(t, p)
    holds = state.holds
    broadcast = p.kind is ProblemKind.BROADCAST
    shared: dict[int, frozenset] = {}
    classes: list[_Klass] = []
    for spec in t.machines:
        m = spec.id
        procs = t.processes(m)
        if broadcast:
            shared[m] = holds[procs[0]]
            classes.append(_Klass(m, "all", procs))
            continue
        sh = set()
        for q in procs:
            sh |= holds[q] - ({own_datum(q)} - state.assembled)
        shared[m] = frozenset(sh)
        groups = {"root": [], "fresh": [], "done": []}
        for q in procs:
            if p.kind is ProblemKind.GATHER and q == p.root:
                groups["root"].append(q)
            elif own_datum(q) in state.assembled:
                groups["done"].append(q)
            else:
                groups["fresh"].append(q)
        classes += [_Klass(m, kind, members) for kind, members in groups.items() if members]

    def offer(k: _Klass) -> frozenset:
        data = shared[k.machine]
        if k.kind in ("root", "fresh"):
            data = data | {own_datum(k.members[0])}
        return data & relevant

    by_machine: dict[int, list[_Klass]] = {}
    for k in classes:
        by_machine.setdefault(k.machine, []).append(k)
    candidates: list[tuple[_Klass, _Klass]] = []
    for k in classes:
        data = offer(k)
        for n in sorted(t.neighbors(k.machine)):
            if data - shared[n]:
                candidates.extend((k, rk) for rk in by_machine[n])

    free = {id(k): len(k.members) for k in classes}
    cap = {m.id: degree(t, m.id) for m in t.machines}
    links: set[Link] = set()
    picked: list[tuple[_Klass, _Klass]] = []

    def addable(c: tuple[_Klass, _Klass]) -> bool:
        s, r = c
        return (
            free[id(s)] > 0
            and free[id(r)] > 0
            and cap[s.machine] > 0
            and cap[r.machine] > 0
            and Link(s.machine, r.machine) not in links
        )

    def take(c: tuple[_Klass, _Klass], delta: int) -> None:
        s, r = c
        free[id(s)] -= delta
        free[id(r)] -= delta
        cap[s.machine] -= delta
        cap[r.machine] -= delta
        if delta > 0:
            links.add(Link(s.machine, r.machine))
        else:
            links.discard(Link(s.machine, r.machine))

    def realize() -> tuple[Action, ...]:
        cursor = {id(k): 0 for k in classes}

        def next_member(k: _Klass) -> ProcessRef:
            q = k.members[cursor[id(k)]]
            cursor[id(k)] += 1
            return q

        actions: list[Action] = []
        for s, r in picked:
            sender = next_member(s)
            actions.append(ExternalTransfer(sender, next_member(r), holds[sender]))
        for k in classes:
            if k.kind == "fresh":
                for q in k.members[cursor[id(k)] :]:
                    actions.append(Assemble(q, own_datum(q)))
        return tuple(actions)

    def rec(i: int) -> Iterator[tuple[Action, ...]]:
        if i == len(candidates):
            if not any(addable(c) for c in candidates):
                yield realize()
            return
        c = candidates[i]
        if addable(c):
            take(c, 1)
            picked.append(c)
            yield from rec(i + 1)
            picked.pop()
            take(c, -1)
        yield from rec(i + 1)

    seen: set = set()
    for actions in rec(0):
        if not actions:
            continue
        key = frozenset(actions)
        if key not in seen:
            seen.add(key)
            yield actions


def enumerate_round_actions(
    t: ClusterTopology, p: Problem, state: KnowledgeState, model: ModelKind = EXTENDED
) -> list[tuple[Action, ...]]:
    """Maximal sets of useful, simultaneously legal actions from ``state``.

    Under the extended model, processes on one machine that play the same
    role (same holdings up to their own contribution) are interchangeable,
    so only one representative assignment is produced per role pattern.
    An action is useful when it changes someone's knowledge of data the
    problem still cares about.
    """
    if model is CLASSIC:
        sets = _classic_round_sets(t, p, state)
    else:
        sets = _extended_round_sets(t, p, state)
    return [s for s in sets if s]


@dataclass
class _Node:
    state: KnowledgeState
    parent: "_Node | None"
    actions: tuple[Action, ...]


def _witness(node: _Node, last: tuple[Action, ...]) -> Schedule:
    rounds = [RoundSchedule(last)]
    while node.parent is not None:
        rounds.append(RoundSchedule(node.actions))
        node = node.parent
    return Schedule(tuple(reversed(rounds)))


def _dominated(bits: int, kept: list[int]) -> bool:
    return any(other & bits == bits for other in kept)


def _ceil_log2(x: float) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0


def lower_bound(t: ClusterTopology, p: Problem, state: KnowledgeState, model: ModelKind = EXTENDED) -> int:
    """Rounds still needed, never overestimated.

    Classic model only: every process takes part in one action per round, so
    the holders of a datum at most double per round, and the fewest holdings
    that together cover all data at most halve.
    Under the extended model a machine may fan out to many machines at once;
    there the bound is just 1 for an incomplete state.
    """
    if is_complete(p, state):
        return 0
    if model is EXTENDED:
        return 1
    holds = state.holds
    data = p.data(t)
    counts = Counter(d for h in holds.values() for d in h)
    bound = 1
    for d in data:
        if p.kind is ProblemKind.GATHER:
            need = counts[d] + (d not in holds[p.root])
        else:
            need = len(holds)
        bound = max(bound, _ceil_log2(need / counts[d]))
    if p.kind is not ProblemKind.BROADCAST:
        # A target ends up holding everything. Walking its receive chain
        # backwards, k holdings covering all data came from at most 2k one
        # round earlier, so the cover number at most halves per round.
        bound = max(bound, _ceil_log2(_cover_number(holds.values(), len(data))))
    return bound


def _cover_number(holdings, universe: int) -> int:
    """Fewest holdings whose union has ``universe`` elements."""
    sets = sorted({frozenset(h) for h in holdings}, key=len, reverse=True)
    sets = [a for a in sets if not any(a < b for b in sets)]
    for k in range(1, len(sets) + 1):
        for combo in combinations(sets, k):
            if len(frozenset().union(*combo)) == universe:
                return k
    return len(sets)


def optimal_rounds(
    t: ClusterTopology,
    p: Problem,
    model: ModelKind = EXTENDED,
    budget: SearchBudget | None = None,
    *,
    symmetry: bool = True,
    dominance: bool = True,
) -> SearchResult:
    """Minimum number of rounds to complete ``p``, with a witness schedule.

    Breadth-first search to a round target that starts at the lower bound
    and grows by one; children that cannot finish by the target are not
    kept. The first target that admits a completion is the optimum.
    Budget exhaustion is reported through ``optimal_rounds=None``.
    """
    budget = budget or SearchBudget()
    deadline = time.monotonic() + budget.time_limit
    canon = Canonicalizer(t, p, model)
    key = canon.key if symmetry else canon.identity_key
    start = initial_state(t, p, model)
    if is_complete(p, start):
        return SearchResult(0, Schedule(), 1)
    explored = 0
    target = lower_bound(t, p, start, model)
    while target <= budget.max_rounds:
        found, explored, reason = _bounded_bfs(t, p, model, start, target, canon, key, dominance, budget, deadline, explored)
        if found is not None:
            return SearchResult(target, found, explored)
        if reason:
            return SearchResult(None, None, explored, reason)
        target += 1
    return SearchResult(None, None, explored, f"no completion within {budget.max_rounds} rounds")


def _bounded_bfs(t, p, model, start, target, canon, key, dominance, budget, deadline, explored):
    """One breadth-first pass to depth ``target``.

    Returns (witness or None, states explored so far, reason the whole search
    must stop or "").
    """
    first = key(start)
    seen = {first}
    kept = [canon.bits(first)]
    frontier = [_Node(start, None, ())]
    explored += 1
    pruned = False
    for depth in range(1, target + 1):
        # Completion is checked for the whole layer before any child is
        # canonicalized: on the last layer that is most of the work.
        moves: list[tuple[_Node, tuple[Action, ...], KnowledgeState]] = []
        for node in frontier:
            for actions in enumerate_round_actions(t, p, node.state, model):
                nxt = advance_round(t, p, node.state, actions, model)
                if is_complete(p, nxt):
                    return _witness(node, actions), explored, ""
                moves.append((node, actions, nxt))
            if time.monotonic() > deadline:
                return None, explored, "time limit exceeded"
        if depth == target:
            break
        layer: list[_Node] = []
        for node, actions, nxt in moves:
            if depth + lower_bound(t, p, nxt, model) > target:
                pruned = True
                continue
            k = key(nxt)
            if k in seen:
                continue
            seen.add(k)
            if dominance:
                # Keys are states relabelled by a symmetry, so comparing
                # them is as sound as comparing the states themselves.
                bits = canon.bits(k)
                if _dominated(bits, kept):
                    continue
                kept = [o for o in kept if o & bits != o]
                kept.append(bits)
            explored += 1
            if explored > budget.max_states:
                return None, explored, "max_states exceeded"
            if time.monotonic() > deadline:
                return None, explored, "time limit exceeded"
            layer.append(_Node(nxt, node, actions))
        if not layer:
            return None, explored, "" if pruned else "no reachable completion"
        frontier = layer
    return None, explored, ""
