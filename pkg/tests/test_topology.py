import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicore_collectives.topology import (
    ClusterTopology,
    Link,
    MachineSpec,
    TopologyError,
    degree,
    gen_complete,
    gen_overlap_family,
    gen_path,
    gen_random,
    gen_star,
    parse_topology,
    serialize_topology,
    validate_topology,
)


def cluster(specs, links):
    return ClusterTopology(tuple(MachineSpec(i, p, n) for i, (p, n) in enumerate(specs)), tuple(Link(*x) for x in links))


def test_minimal_cluster_is_valid():
    assert validate_topology(cluster([(2, 1), (2, 1)], [(0, 1)])) == []


def test_self_link_rejected():
    errors = validate_topology(cluster([(1, 1), (1, 1)], [(0, 0)]))
    assert any("self-link" in e and "0" in e for e in errors)


def test_dangling_endpoint_rejected():
    errors = validate_topology(cluster([(1, 1), (1, 1)], [(0, 5)]))
    assert any("dangling" in e and "5" in e for e in errors)


def test_duplicate_machine_and_link_rejected():
    t = ClusterTopology((MachineSpec(0, 1, 1), MachineSpec(0, 1, 1)), ())
    assert any("duplicate machine id 0" in e for e in validate_topology(t))
    t = cluster([(1, 1), (1, 1)], [(0, 1), (1, 0)])
    assert any("duplicate link" in e for e in validate_topology(t))


def test_zero_counts_rejected():
    errors = validate_topology(cluster([(0, 1), (1, 0)], []))
    assert any("machine 0" in e and "zero processes" in e for e in errors)
    assert any("machine 1" in e and "zero NICs" in e for e in errors)


def test_link_is_unordered():
    assert Link(3, 1) == Link(1, 3)


@pytest.mark.parametrize(
    "procs,nics,links,expected",
    [(8, 4, 6, 4), (2, 4, 6, 2), (4, 4, 1, 1)],
)
def test_degree(procs, nics, links, expected):
    specs = [(procs, nics)] + [(1, 1)] * links
    t = cluster(specs, [(0, i) for i in range(1, links + 1)])
    assert degree(t, 0) == expected


def test_degree_unknown_machine():
    with pytest.raises(KeyError):
        degree(gen_complete(2, 1, 1), 7)


def test_gen_complete_shapes():
    t = gen_complete(4, 2, 1)
    assert t.machine_count == 4 and len(t.links) == 6
    t = gen_complete(1, 8, 1)
    assert t.machine_count == 1 and t.links == () and t.process_count == 8
    t = gen_complete(2, 1, 1)
    assert t.links == (Link(0, 1),) and t.process_count == 2


def test_gen_star_shapes():
    t = gen_star(4, 4, 4)
    assert t.machine_count == 5 and len(t.links) == 4 and degree(t, 0) == 4
    assert all(t.machine(m).process_count == 1 and t.machine(m).nic_count == 1 for m in range(1, 5))
    t = gen_star(1, 1, 1)
    assert t.machine_count == 2 and len(t.links) == 1
    assert degree(gen_star(2, 4, 4), 0) == 2


def test_gen_overlap_family_structure():
    t = gen_overlap_family(3)
    assert len(t.neighbors(1) & t.neighbors(2)) == 3 + 1  # the three shared machines plus the source
    assert len((t.neighbors(1) & t.neighbors(2)) - {0}) == 3
    assert t.neighbors(4) == frozenset({3})
    assert validate_topology(gen_overlap_family(2)) == []
    assert gen_overlap_family(3) == gen_overlap_family(3)
    with pytest.raises(ValueError):
        gen_overlap_family(1)


def test_gen_random_deterministic_and_connected():
    assert gen_random(6, 3, 2, 0.3, seed=11) == gen_random(6, 3, 2, 0.3, seed=11)
    full = gen_random(5, 2, 2, 1.0, seed=1)
    assert len(full.links) == 10
    tree = gen_random(6, 2, 2, 0.0, seed=4)
    assert len(tree.links) == 5 and tree.machine_graph_connected()


def test_parse_example():
    t = parse_topology("machine 0 procs=2 nics=1\nmachine 1 procs=2 nics=1\nlink 0 1")
    assert t == cluster([(2, 1), (2, 1)], [(0, 1)])


def test_parse_comments_and_blank_lines():
    text = "# cluster\n\nmachine 0 procs=1 nics=1   # head\nmachine 1 procs=3 nics=2\nlink 1 0\n"
    assert parse_topology(text) == cluster([(1, 1), (3, 2)], [(0, 1)])


def test_parse_syntax_error_has_line_number():
    with pytest.raises(TopologyError) as info:
        parse_topology("machine 0 procs=1 nics=1\n\nlnk 0 1\n")
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_parse_semantic_errors():
    with pytest.raises(TopologyError, match="zero processes"):
        parse_topology("machine 0 procs=0 nics=1")
    with pytest.raises(TopologyError, match="contiguous"):
        parse_topology("machine 0 procs=1 nics=1\nmachine 2 procs=1 nics=1\nlink 0 2")


def test_star_round_trip():
    t = gen_star(4, 4, 4)
    assert parse_topology(serialize_topology(t)) == t


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 7),
    procs=st.integers(1, 4),
    nics=st.integers(1, 4),
    prob=st.floats(0, 1),
    seed=st.integers(0, 10_000),
)
def test_random_generator_properties(n, procs, nics, prob, seed):
    t = gen_random(n, procs, nics, prob, seed)
    assert validate_topology(t) == []
    assert t.machine_graph_connected()
    assert parse_topology(serialize_topology(t)) == t
    for m in t.machines:
        d = degree(t, m.id)
        assert d <= m.nic_count and d <= m.process_count and d <= len(t.neighbors(m.id))
        assert 1 <= m.process_count <= procs and 1 <= m.nic_count <= nics


@pytest.mark.parametrize(
    "t",
    [gen_complete(3, 2, 1), gen_star(3, 2, 5), gen_path(4, 2, 1), gen_overlap_family(2), gen_overlap_family(4)],
)
def test_generators_valid(t):
    assert validate_topology(t) == []
