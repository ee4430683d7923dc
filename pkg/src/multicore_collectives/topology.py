"""Cluster description: machines, NICs, processes and the external links between machines.

The external graph is over machines, not processes. NICs form a machine-level
pool that any incident link may use in a round.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple


class TopologyError(ValueError):
    """Raised when a topology (or topology file) is malformed."""

    def __init__(self, message: str, errors: list[str] | None = None, line: int | None = None):
        super().__init__(message)
        self.errors = errors or [message]
        self.line = line


class ProcessRef(NamedTuple):
    machine: int
    index: int

    def __str__(self) -> str:
        return f"{self.machine},{self.index}"


@dataclass(frozen=True)
class MachineSpec:
    id: int
    process_count: int
    nic_count: int


@dataclass(frozen=True)
class Link:
    """Undirected external link; endpoints are stored in ascending order."""

    a: int
    b: int

    def __post_init__(self) -> None:
        if self.a > self.b:
            lo, hi = self.b, self.a
            object.__setattr__(self, "a", lo)
            object.__setattr__(self, "b", hi)

    def other(self, m: int) -> int:
        return self.b if m == self.a else self.a


@dataclass(frozen=True)
class ClusterTopology:
    machines: tuple[MachineSpec, ...]
    links: tuple[Link, ...] = ()
    _adj: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "links", tuple(self.links))
        adj: dict[int, set[int]] = {m.id: set() for m in self.machines}
        for link in self.links:
            for end, other in ((link.a, link.b), (link.b, link.a)):
                if end in adj and end != other:
                    adj[end].add(other)
        object.__setattr__(self, "_adj", {m: frozenset(s) for m, s in adj.items()})

    @property
    def machine_count(self) -> int:
        return len(self.machines)

    def machine(self, m: int) -> MachineSpec:
        if not 0 <= m < len(self.machines) or self.machines[m].id != m:
            for spec in self.machines:
                if spec.id == m:
                    return spec
            raise KeyError(f"unknown machine {m}")
        return self.machines[m]

    def neighbors(self, m: int) -> frozenset[int]:
        if m not in self._adj:
            raise KeyError(f"unknown machine {m}")
        return self._adj[m]

    def linked(self, a: int, b: int) -> bool:
        return b in self._adj.get(a, ())

    def processes(self, m: int | None = None) -> list[ProcessRef]:
        """All processes of machine ``m`` (or of the whole cluster), in id order."""
        specs = self.machines if m is None else (self.machine(m),)
        return [ProcessRef(s.id, i) for s in specs for i in range(s.process_count)]

    @property
    def process_count(self) -> int:
        return sum(s.process_count for s in self.machines)

    def has_process(self, p: ProcessRef) -> bool:
        try:
            return 0 <= p.index < self.machine(p.machine).process_count
        except KeyError:
            return False

    def machine_graph_connected(self) -> bool:
        if not self.machines:
            return True
        start = self.machines[0].id
        seen = {start}
        stack = [start]
        while stack:
            for n in self._adj[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(self.machines)

    def bfs_distances(self, source: int) -> dict[int, int]:
        dist = {source: 0}
        queue = [source]
        for m in queue:
            for n in sorted(self._adj[m]):
                if n not in dist:
                    dist[n] = dist[m] + 1
                    queue.append(n)
        return dist


def validate_topology(t: ClusterTopology) -> list[str]:
    """Return structural errors; an empty list means the topology is valid."""
    errors: list[str] = []
    seen: set[int] = set()
    for m in t.machines:
        if m.id in seen:
            errors.append(f"duplicate machine id {m.id}")
        seen.add(m.id)
        if m.process_count < 1:
            errors.append(f"machine {m.id}: zero processes (procs={m.process_count})")
        if m.nic_count < 1:
            errors.append(f"machine {m.id}: zero NICs (nics={m.nic_count})")
    if sorted(seen) != list(range(len(seen))):
        errors.append(f"machine ids are not contiguous from 0: {sorted(seen)}")
    pairs: set[tuple[int, int]] = set()
    for link in t.links:
        if link.a == link.b:
            errors.append(f"link {link.a} {link.b}: self-link on machine {link.a}")
            continue
        for end in (link.a, link.b):
            if end not in seen:
                errors.append(f"link {link.a} {link.b}: dangling endpoint {end}")
        key = (link.a, link.b)
        if key in pairs:
            errors.append(f"link {link.a} {link.b}: duplicate link")
        pairs.add(key)
    return errors


def check_topology(t: ClusterTopology) -> ClusterTopology:
    errors = validate_topology(t)
    if errors:
        raise TopologyError("; ".join(errors), errors)
    return t


def degree(t: ClusterTopology, m: int) -> int:
    """Effective external concurrency of machine ``m`` per round.

    min(NICs, processes, incident links): a machine with n NICs and at least
    n processes has degree n, capped further by how many links it has.
    """
    spec = t.machine(m)
    return min(spec.nic_count, spec.process_count, len(t.neighbors(m)))


def _uniform(count: int, procs: int, nics: int) -> tuple[MachineSpec, ...]:
    return tuple(MachineSpec(i, procs, nics) for i in range(count))


def gen_complete(machine_count: int, procs_per_machine: int, nics_per_machine: int) -> ClusterTopology:
    if min(machine_count, procs_per_machine, nics_per_machine) < 1:
        raise ValueError("all counts must be >= 1")
    links = tuple(Link(a, b) for a, b in combinations(range(machine_count), 2))
    return ClusterTopology(_uniform(machine_count, procs_per_machine, nics_per_machine), links)


def gen_star(center_procs: int, center_nics: int, leaf_count: int) -> ClusterTopology:
    if min(center_procs, center_nics, leaf_count) < 1:
        raise ValueError("all counts must be >= 1")
    machines = [MachineSpec(0, center_procs, center_nics)]
    machines += [MachineSpec(i, 1, 1) for i in range(1, leaf_count + 1)]
    return ClusterTopology(tuple(machines), tuple(Link(0, i) for i in range(1, leaf_count + 1)))


def gen_path(machine_count: int, procs_per_machine: int = 1, nics_per_machine: int = 1) -> ClusterTopology:
    if min(machine_count, procs_per_machine, nics_per_machine) < 1:
        raise ValueError("all counts must be >= 1")
    links = tuple(Link(i, i + 1) for i in range(machine_count - 1))
    return ClusterTopology(_uniform(machine_count, procs_per_machine, nics_per_machine), links)


# Machine roles in gen_overlap_family.
OVERLAP_SOURCE, OVERLAP_HUB1, OVERLAP_HUB2, OVERLAP_LOW, OVERLAP_PRIVATE = 0, 1, 2, 3, 4


def gen_overlap_family(k: int) -> ClusterTopology:
    """Counterexample family for highest-degree-first broadcast.

    Layout (machine ids):

    * 0  source, 1 process / 1 NIC, linked to 1, 2 and 3
    * 1, 2  hubs, k+1 processes / k+1 NICs, each linked to 0 and to every shared machine
    * 3  low-degree machine, 1 process / 1 NIC, linked to 0 and 4
    * 4  private machine reachable only through 3
    * 5 .. 4+k  shared machines, 1 process / 1 NIC, each linked to both hubs

    The source can only send once per round. Ranking by degree sends to both
    hubs first, although the second hub only reaches machines the first one
    already covers, and the private machine is reached one round late.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    shared = list(range(5, 5 + k))
    machines = [
        MachineSpec(OVERLAP_SOURCE, 1, 1),
        MachineSpec(OVERLAP_HUB1, k + 1, k + 1),
        MachineSpec(OVERLAP_HUB2, k + 1, k + 1),
        MachineSpec(OVERLAP_LOW, 1, 1),
        MachineSpec(OVERLAP_PRIVATE, 1, 1),
    ] + [MachineSpec(c, 1, 1) for c in shared]
    links = [Link(0, 1), Link(0, 2), Link(0, 3), Link(3, 4)]
    links += [Link(h, c) for h in (1, 2) for c in shared]
    return ClusterTopology(tuple(machines), tuple(links))


def gen_random(
    machine_count: int,
    max_procs: int,
    max_nics: int,
    edge_probability: float,
    seed: int,
) -> ClusterTopology:
    """Seeded random cluster, forced connected by adding spanning edges."""
    if machine_count < 1 or max_procs < 1 or max_nics < 1:
        raise ValueError("counts must be >= 1")
    if not 0.0 <= edge_probability <= 1.0:
        raise ValueError("edge_probability must be within [0, 1]")
    rng = random.Random(seed)
    machines = tuple(
        MachineSpec(i, rng.randint(1, max_procs), rng.randint(1, max_nics)) for i in range(machine_count)
    )
    pairs = {(a, b) for a, b in combinations(range(machine_count), 2) if rng.random() < edge_probability}
    # Join components in id order: the lowest machine of each later component
    # links to a random machine already joined.
    parent = list(range(machine_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        parent[find(a)] = find(b)
    joined = [0]
    for m in range(1, machine_count):
        if find(m) != find(0):
            anchor = rng.choice(joined)
            pairs.add((anchor, m))
            parent[find(m)] = find(anchor)
        joined.append(m)
    return ClusterTopology(machines, tuple(Link(a, b) for a, b in sorted(pairs)))


_MACHINE_RE = re.compile(r"^machine\s+(-?\d+)\s+procs=(-?\d+)\s+nics=(-?\d+)$")
_LINK_RE = re.compile(r"^link\s+(-?\d+)\s+(-?\d+)$")


def parse_topology(text: str) -> ClusterTopology:
    machines: list[MachineSpec] = []
    links: list[Link] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _MACHINE_RE.match(line):
            machines.append(MachineSpec(int(m[1]), int(m[2]), int(m[3])))
        elif m := _LINK_RE.match(line):
            links.append(Link(int(m[1]), int(m[2])))
        else:
            raise TopologyError(f"line {lineno}: syntax error: {raw.strip()!r}", line=lineno)
    t = ClusterTopology(tuple(machines), tuple(links))
    return check_topology(t)


def serialize_topology(t: ClusterTopology) -> str:
    lines = [f"machine {m.id} procs={m.process_count} nics={m.nic_count}" for m in t.machines]
    lines += [f"link {link.a} {link.b}" for link in t.links]
    return "\n".join(lines) + "\n"
