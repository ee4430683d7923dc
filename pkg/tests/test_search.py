import math
import random

import pytest
from bruteforce import all_rounds, brute_force_rounds

from multicore_collectives.algorithms import ALGORITHMS, build_schedule
from multicore_collectives.model import (
    CLASSIC,
    EXTENDED,
    ROOT,
    ExternalTransfer,
    Problem,
    ProblemKind,
    RoundViolation,
    apply_round,
    initial_state,
    run_schedule,
)
from multicore_collectives.search import SearchBudget, enumerate_round_actions, lower_bound, optimal_rounds
from multicore_collectives.topology import ProcessRef as P
from multicore_collectives.topology import gen_complete, gen_overlap_family, gen_random, gen_star

PROBLEMS = {
    ProblemKind.BROADCAST: Problem.broadcast(),
    ProblemKind.GATHER: Problem.gather(),
    ProblemKind.ALL_TO_ALL: Problem.all_to_all(),
}


def small_instances(count, max_machines=3, max_procs=2, max_total=4):
    out = []
    seed = 0
    while len(out) < count:
        rng = random.Random(seed)
        t = gen_random(rng.randint(1, max_machines), max_procs, 2, rng.random(), seed)
        if t.process_count <= max_total:
            out.append(t)
        seed += 1
    return out


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
def test_two_singletons_single_set(model):
    t = gen_complete(2, 1, 1)
    p = Problem.broadcast()
    sets = enumerate_round_actions(t, p, initial_state(t, p, model), model)
    assert sets == [(ExternalTransfer(P(0, 0), P(1, 0), {ROOT}),)]


def test_star_two_parallel_transfers():
    t = gen_star(2, 2, 2)
    p = Problem.broadcast()
    sets = enumerate_round_actions(t, p, initial_state(t, p))
    assert len(sets) == 1
    assert sorted(a.receiver.machine for a in sets[0]) == [1, 2]
    assert len({a.sender for a in sets[0]}) == 2


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
def test_complete3_after_first_round(model):
    # After 0 -> 1 only machine 2 is uninformed and it can take one message:
    # either 0 or 1 sends to it. Hand count: 2 maximal sets.
    t = gen_complete(3, 1, 1)
    p = Problem.broadcast()
    state = apply_round(t, p, initial_state(t, p, model), [ExternalTransfer(P(0, 0), P(1, 0), {ROOT})], model)
    sets = enumerate_round_actions(t, p, state, model)
    assert sorted(a.sender.machine for (a,) in sets) == [0, 1]


def _useful_singles(t, p, state, model):
    for (a,) in (r for r in all_rounds(t, p, state, model) if len(r) == 1):
        try:
            after = apply_round(t, p, state, (a,), model)
        except RoundViolation:
            continue
        relevant = set(p.data(t))
        if p.kind is ProblemKind.GATHER:
            relevant.discard((p.root.machine, p.root.index))
        grew = any((after.holds[q] - state.holds[q]) & relevant for q in t.processes())
        if grew or (after.assembled - state.assembled) & relevant:
            yield a


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
@pytest.mark.parametrize("kind", list(ProblemKind))
def test_returned_sets_are_legal_and_maximal(model, kind):
    p = PROBLEMS[kind]
    rng = random.Random(5)
    for t in small_instances(12):
        state = initial_state(t, p, model)
        for _ in range(3):
            sets = enumerate_round_actions(t, p, state, model)
            if not sets:
                break
            for s in sets:
                apply_round(t, p, state, s, model)  # legal
                for a in _useful_singles(t, p, state, model):
                    if a in s:
                        continue
                    with pytest.raises(RoundViolation):
                        apply_round(t, p, state, (*s, a), model)
            state = apply_round(t, p, state, rng.choice(sets), model)


def test_oracle_examples():
    assert optimal_rounds(gen_complete(8, 1, 1), Problem.broadcast(), CLASSIC).optimal_rounds == 3
    assert optimal_rounds(gen_star(4, 4, 4), Problem.broadcast()).optimal_rounds == 1
    assert optimal_rounds(gen_star(4, 4, 4), Problem.gather()).optimal_rounds == 2
    single = optimal_rounds(gen_complete(1, 4, 2), Problem.broadcast())
    assert single.optimal_rounds == 0 and len(single.witness) == 0


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
def test_classic_broadcast_matches_closed_form(n):
    assert optimal_rounds(gen_complete(n, 1, 1), Problem.broadcast(), CLASSIC).optimal_rounds == math.ceil(math.log2(n))


def test_overlap_oracle():
    for k in (2, 3):
        assert optimal_rounds(gen_overlap_family(k), Problem.broadcast()).optimal_rounds == 3


def test_gather_and_all_to_all_small_optima():
    assert optimal_rounds(gen_complete(2, 2, 1), Problem.gather()).optimal_rounds == 2
    assert optimal_rounds(gen_complete(2, 1, 1), Problem.all_to_all()).optimal_rounds == 2
    assert optimal_rounds(gen_complete(1, 8, 1), Problem.gather()).optimal_rounds == 1


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
@pytest.mark.parametrize("kind", list(ProblemKind))
def test_agrees_with_brute_force(model, kind):
    p = PROBLEMS[kind]
    for t in small_instances(10):
        result = optimal_rounds(t, p, model)
        assert result.optimal_rounds == brute_force_rounds(t, p, model), t


def sized(model, kind):
    # Classic all-to-all is one-way gossip; its state space grows fastest.
    return 4 if (model, kind) == (CLASSIC, ProblemKind.ALL_TO_ALL) else 6


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
@pytest.mark.parametrize("kind", list(ProblemKind))
def test_witness_is_sound_and_bound_admissible(model, kind):
    p = PROBLEMS[kind]
    for t in small_instances(20, max_machines=4, max_total=sized(model, kind)):
        result = optimal_rounds(t, p, model)
        report = run_schedule(t, p, result.witness, model)
        assert report.valid and report.completed
        assert report.rounds_used == result.optimal_rounds
        state = initial_state(t, p, model)
        for i, rnd in enumerate(result.witness.rounds):
            assert lower_bound(t, p, state, model) <= result.optimal_rounds - i
            state = apply_round(t, p, state, rnd, model)


@pytest.mark.parametrize("model", [CLASSIC, EXTENDED])
@pytest.mark.parametrize("kind", list(ProblemKind))
def test_pruning_never_changes_the_optimum(model, kind):
    p = PROBLEMS[kind]
    for t in small_instances(10, max_machines=4, max_total=sized(model, kind) - 1):
        full = optimal_rounds(t, p, model).optimal_rounds
        assert optimal_rounds(t, p, model, dominance=False).optimal_rounds == full
        assert optimal_rounds(t, p, model, symmetry=False).optimal_rounds == full


@pytest.mark.parametrize(
    "t,p,model,expected",
    [
        (gen_complete(8, 1, 1), Problem.gather(), CLASSIC, 3),
        (gen_complete(16, 1, 1), Problem.broadcast(), CLASSIC, 4),
        (gen_complete(5, 1, 1), Problem.all_to_all(), CLASSIC, 3),
        (gen_star(2, 2, 2), Problem.broadcast(), EXTENDED, 1),
        (gen_complete(1, 3, 1), Problem.broadcast(), EXTENDED, 0),
    ],
)
def test_lower_bound_known_values(t, p, model, expected):
    assert lower_bound(t, p, initial_state(t, p, model), model) == expected


def test_classic_gather_on_eight_singletons():
    result = optimal_rounds(gen_complete(8, 1, 1), Problem.gather(), CLASSIC)
    assert result.optimal_rounds == 3


def test_constructors_never_beat_the_oracle():
    for t in small_instances(25, max_machines=4, max_procs=3, max_total=6):
        for algorithm, info in ALGORITHMS.items():
            p = PROBLEMS[info.problem]
            report = run_schedule(t, p, build_schedule(algorithm, t, p), info.model)
            best = optimal_rounds(t, p, info.model).optimal_rounds
            assert report.rounds_used >= best, (algorithm, t)


def test_budget_exhaustion_is_reported():
    result = optimal_rounds(gen_star(4, 4, 4), Problem.gather(), budget=SearchBudget(max_states=1))
    assert result.exhausted and result.witness is None and "max_states" in result.reason
    result = optimal_rounds(gen_complete(8, 1, 1), Problem.broadcast(), CLASSIC, SearchBudget(max_rounds=2))
    assert result.exhausted and "2 rounds" in result.reason


@pytest.mark.parametrize("field", ["max_rounds", "max_states", "time_limit"])
def test_budget_must_be_positive(field):
    with pytest.raises(ValueError):
        SearchBudget(**{field: 0})
