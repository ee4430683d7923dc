"""Canonical keys for knowledge states, modulo cluster symmetries.

The symmetry group used is the one that is cheap to justify: permutations of
*twin* machines (same spec, same neighbourhood apart from each other) and of
the non-root processes inside a machine. Both preserve the topology and the
problem, so two states with equal keys have equal optimal completion times.

The key is the minimum encoding over that group, found by colour refinement
plus individualization (branching only on colour cells the refinement cannot
split, and only once for cells whose members are swappable already).
"""

from __future__ import annotations

from itertools import combinations

from .model import EXTENDED, KnowledgeState, ModelKind, Problem, ProblemKind, own_datum
from .topology import ClusterTopology

Relation = tuple  # tuple[frozenset[int], ...]; datum -1 is the broadcast token


def twin_classes(t: ClusterTopology, fixed: frozenset[int] = frozenset()) -> list[list[int]]:
    """Group machines that are interchangeable by a topology automorphism.

    Machines u, v are twins when they share (procs, nics) and
    N(u) - {v} == N(v) - {u}. Machines in ``fixed`` stay alone.
    """
    ids = [m.id for m in t.machines]
    parent = {m: m for m in ids}

    def find(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    for u, v in combinations(ids, 2):
        if u in fixed or v in fixed:
            continue
        su, sv = t.machine(u), t.machine(v)
        if (su.process_count, su.nic_count) != (sv.process_count, sv.nic_count):
            continue
        if t.neighbors(u) - {v} == t.neighbors(v) - {u}:
            parent[max(find(u), find(v))] = min(find(u), find(v))
    groups: dict[int, list[int]] = {}
    for m in ids:
        groups.setdefault(find(m), []).append(m)
    return [sorted(g) for _, g in sorted(groups.items())]


def _ranks(signatures: list) -> list[int]:
    order = {sig: i for i, sig in enumerate(sorted(set(signatures)))}
    return [order[s] for s in signatures]


class Canonicalizer:
    """Per-instance helper; build once per (topology, problem, model)."""

    def __init__(self, t: ClusterTopology, p: Problem, model: ModelKind = EXTENDED):
        self.t = t
        self.p = p
        self.extended = model is EXTENDED
        self.broadcast = p.kind is ProblemKind.BROADCAST
        self.procs = t.processes()
        self.gid = {q: g for g, q in enumerate(self.procs)}
        self.machine_of = [q.machine for q in self.procs]
        self.members = [[self.gid[q] for q in t.processes(m.id)] for m in t.machines]
        fixed_process = p.root if p.kind is ProblemKind.GATHER else None
        self.fixed = None if fixed_process is None else self.gid[fixed_process]
        fixed_machines = frozenset() if fixed_process is None else frozenset({fixed_process.machine})
        self.classes = twin_classes(t, fixed_machines)
        self.class_of = [0] * t.machine_count
        for c, group in enumerate(self.classes):
            for m in group:
                self.class_of[m] = c
        self.entities = t.machine_count if self.extended else len(self.procs)

    # -- state <-> relation ------------------------------------------------

    def relation(self, state: KnowledgeState) -> Relation:
        """Who holds what, by entity index (machine if extended, else process).

        Data are process indices; -1 is the broadcast token. Under the
        extended model an unpublished own contribution is not part of the
        machine's shared memory and is left out.
        """

        def code(d) -> int:
            return -1 if d.is_root else self.gid[d.origin]

        if not self.extended:
            return tuple(frozenset(code(d) for d in state.holds[q]) for q in self.procs)
        rel = []
        for m in self.t.machines:
            shared = set()
            for q in self.t.processes(m.id):
                for d in state.holds[q]:
                    if not self.broadcast and d == own_datum(q) and d not in state.assembled:
                        continue
                    shared.add(code(d))
            rel.append(frozenset(shared))
        return tuple(rel)

    def identity_key(self, state: KnowledgeState) -> tuple:
        return tuple(tuple(sorted(s)) for s in self.relation(state))

    def key(self, state: KnowledgeState) -> tuple:
        return self.canonical(self.relation(state))

    def bits(self, key: tuple) -> int:
        """Pack a key (identity or canonical) into one int, so that set
        inclusion between two keys is ``a & b == b``."""
        width = len(self.procs) + 1
        out = 0
        for e, data in enumerate(key):
            base = e * width + 1
            for d in data:
                out |= 1 << (base + d)
        return out

    # -- refinement ----------------------------------------------------------

    def _holders(self, rel: Relation) -> list[list[int]]:
        holders: list[list[int]] = [[] for _ in self.procs]
        for e, data in enumerate(rel):
            for d in data:
                if d >= 0:
                    holders[d].append(e)
        return holders

    def _refine(self, rel: Relation, holders, mcol: list[int], pcol: list[int]) -> tuple[list[int], list[int]]:
        def dcol(d: int) -> int:
            return -1 if d < 0 else pcol[d]

        count = len(set(mcol)) + len(set(pcol))
        while True:
            if self.extended:
                msig = [
                    (mcol[m], tuple(sorted(pcol[g] for g in self.members[m])), tuple(sorted(map(dcol, rel[m]))))
                    for m in range(len(mcol))
                ]
                psig = [
                    (pcol[g], mcol[self.machine_of[g]], tuple(sorted(mcol[h] for h in holders[g])))
                    for g in range(len(pcol))
                ]
            else:
                msig = [(mcol[m], tuple(sorted(pcol[g] for g in self.members[m]))) for m in range(len(mcol))]
                psig = [
                    (
                        pcol[g],
                        mcol[self.machine_of[g]],
                        tuple(sorted(map(dcol, rel[g]))),
                        tuple(sorted(pcol[h] for h in holders[g])),
                    )
                    for g in range(len(pcol))
                ]
            mcol, pcol = _ranks(msig), _ranks(psig)
            new_count = len(set(mcol)) + len(set(pcol))
            if new_count == count:
                return mcol, pcol
            count = new_count

    # -- symmetry test -------------------------------------------------------

    def _is_automorphism(self, rel: Relation, perm: list[int], mperm: list[int]) -> bool:
        """Does the process permutation ``perm`` (with machine map ``mperm``) fix ``rel``?"""

        def move(data: frozenset) -> frozenset:
            return frozenset(d if d < 0 else perm[d] for d in data)

        if self.extended:
            return all(rel[mperm[m]] == move(rel[m]) for m in range(len(rel)))
        return all(rel[perm[g]] == move(rel[g]) for g in range(len(rel)))

    def _swap_machines(self, u: int, v: int, pcol: list[int]) -> tuple[list[int], list[int]] | None:
        perm = list(range(len(self.procs)))
        mperm = list(range(self.t.machine_count))
        mperm[u], mperm[v] = v, u
        pu = sorted(self.members[u], key=lambda g: (pcol[g], g))
        pv = sorted(self.members[v], key=lambda g: (pcol[g], g))
        for a, b in zip(pu, pv):
            if pcol[a] != pcol[b]:
                return None
            perm[a], perm[b] = b, a
        return perm, mperm

    def _symmetric_cell(self, rel: Relation, cell: list[int], machines: bool, pcol: list[int]) -> bool:
        first = cell[0]
        for other in cell[1:]:
            if machines:
                swap = self._swap_machines(first, other, pcol)
                if swap is None:
                    return False
                perm, mperm = swap
            else:
                perm = list(range(len(self.procs)))
                perm[first], perm[other] = other, first
                mperm = list(range(self.t.machine_count))
            if not self._is_automorphism(rel, perm, mperm):
                return False
        return True

    # -- canonical form ------------------------------------------------------

    def _encode(self, rel: Relation, mcol: list[int], pcol: list[int]) -> tuple:
        new_machine = [0] * len(mcol)
        for group in self.classes:
            for slot, m in zip(group, sorted(group, key=lambda m: mcol[m])):
                new_machine[m] = slot
        relabel = [0] * len(pcol)
        for m, members in enumerate(self.members):
            target = self.members[new_machine[m]]
            movable = [g for g in members if g != self.fixed]
            slots = [g for g in target if g != self.fixed]
            for slot, g in zip(slots, sorted(movable, key=lambda g: pcol[g])):
                relabel[g] = slot
            if self.fixed in members:
                relabel[self.fixed] = self.fixed
        out: list = [None] * len(rel)
        for e, data in enumerate(rel):
            target = new_machine[e] if self.extended else relabel[e]
            out[target] = tuple(sorted(d if d < 0 else relabel[d] for d in data))
        return tuple(out)

    def _cells(self, mcol: list[int], pcol: list[int]) -> tuple[list[int], bool] | None:
        by_color: dict[int, list[int]] = {}
        for m, c in enumerate(mcol):
            by_color.setdefault(c, []).append(m)
        for c in sorted(by_color):
            if len(by_color[c]) > 1:
                return by_color[c], True
        best = None
        for m in sorted(range(len(mcol)), key=lambda m: mcol[m]):
            groups: dict[int, list[int]] = {}
            for g in self.members[m]:
                if g != self.fixed:
                    groups.setdefault(pcol[g], []).append(g)
            for c in sorted(groups):
                if len(groups[c]) > 1:
                    best = groups[c]
                    break
            if best:
                return best, False
        return None

    def canonical(self, rel: Relation) -> tuple:
        holders = self._holders(rel)
        mcol = list(self.class_of)
        pcol = [(self.class_of[self.machine_of[g]], g == self.fixed) for g in range(len(self.procs))]
        pcol = _ranks(pcol)
        mcol, pcol = self._refine(rel, holders, mcol, pcol)
        return self._search(rel, holders, mcol, pcol)

    def _search(self, rel: Relation, holders, mcol: list[int], pcol: list[int]) -> tuple:
        found = self._cells(mcol, pcol)
        if found is None:
            return self._encode(rel, mcol, pcol)
        cell, machines = found
        branches = cell[:1] if self._symmetric_cell(rel, cell, machines, pcol) else cell
        best = None
        for x in branches:
            if machines:
                m2 = _ranks([(c, m != x) for m, c in enumerate(mcol)])
                p2 = pcol
            else:
                m2 = mcol
                p2 = _ranks([(c, g != x) for g, c in enumerate(pcol)])
            m2, p2 = self._refine(rel, holders, m2, p2)
            enc = self._search(rel, holders, m2, p2)
            if best is None or enc < best:
                best = enc
        return best


def canonical_state(
    t: ClusterTopology, state: KnowledgeState, problem: Problem, model: ModelKind = EXTENDED
) -> tuple:
    """Hashable key, equal for states related by a twin/process symmetry."""
    return Canonicalizer(t, problem, model).key(state)
