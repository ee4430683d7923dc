import json

import pytest

from multicore_collectives.algorithms import AlgorithmId, multicore_greedy_broadcast
from multicore_collectives.cli import main
from multicore_collectives.harness import (
    ComparisonRow,
    ExperimentConfig,
    cmd_demo_claims,
    cmd_run,
    cmd_search,
    format_records,
    format_table,
    generate_topology,
)
from multicore_collectives.model import CLASSIC, EXTENDED, Problem
from multicore_collectives.schedule_io import serialize_schedule
from multicore_collectives.search import SearchBudget
from multicore_collectives.topology import gen_complete, gen_star, serialize_topology


def test_generator_specs():
    assert generate_topology("star:4,4,4") == gen_star(4, 4, 4)
    assert generate_topology("complete:3,2,1") == gen_complete(3, 2, 1)
    assert generate_topology("path:3").machine_count == 3
    assert generate_topology("random:5,2,2,0.3", seed=4) == generate_topology("random:5,2,2,0.3", seed=4)
    with pytest.raises(ValueError):
        generate_topology("star:1,2")
    with pytest.raises(ValueError):
        generate_topology("ring:3")


def test_config_needs_work():
    with pytest.raises(ValueError):
        ExperimentConfig(gen_star(2, 2, 2), Problem.broadcast())
    with pytest.raises(ValueError, match="solves gather"):
        ExperimentConfig(gen_star(2, 2, 2), Problem.broadcast(), [AlgorithmId.MULTICORE_GATHER])


def test_run_greedy_on_star():
    rows = cmd_run(ExperimentConfig(gen_star(4, 4, 4), Problem.broadcast(), [AlgorithmId.MULTICORE_GREEDY_BROADCAST]))
    assert len(rows) == 1
    assert rows[0].rounds == 1 and rows[0].valid and rows[0].completed


def test_run_wrong_model_is_a_row_not_a_crash():
    config = ExperimentConfig(
        gen_star(4, 4, 4), Problem.broadcast(), [AlgorithmId.MULTICORE_GREEDY_BROADCAST], [CLASSIC, EXTENDED]
    )
    classic, extended = cmd_run(config)
    assert classic.model == "classic" and not classic.valid
    assert extended.valid and extended.completed


def test_run_with_oracle_gap_zero_for_binomial():
    config = ExperimentConfig(gen_complete(4, 1, 1), Problem.broadcast(), [AlgorithmId.BINOMIAL_BROADCAST], oracle=True)
    (row,) = cmd_run(config)
    assert row.oracle_rounds == 2 and row.gap == 0


def test_oracle_only_rows():
    rows = cmd_run(ExperimentConfig(gen_star(3, 3, 3), Problem.gather(), oracle=True, models=[EXTENDED, CLASSIC]))
    assert [(r.algorithm, r.model, r.rounds) for r in rows] == [("oracle", "extended", 2), ("oracle", "classic", 3)]


def test_gap_only_for_valid_rows():
    row = ComparisonRow("t", "a", "classic", 1, 4, False, False, 3)
    assert row.gap is None
    assert ComparisonRow("t", "a", "extended", 4, 4, True, True, 1).gap == 3


def test_table_and_records_share_rows():
    rows = [ComparisonRow("star", "x", "extended", 2, 5, True, True, 2), ComparisonRow("star", "y", "classic", 3, 1, False, False)]
    table = format_table(rows).splitlines()
    assert table[0].split() == [
        "topology", "algorithm", "model", "rounds", "external_messages", "valid", "completed", "oracle_rounds", "gap"
    ]
    assert table[1].split() == ["star", "x", "extended", "2", "5", "true", "true", "2", "0"]
    records = [json.loads(line) for line in format_records(rows).splitlines()]
    assert records[0] == {
        "topology": "star", "algorithm": "x", "model": "extended", "rounds": 2, "external_messages": 5,
        "valid": True, "completed": True, "oracle_rounds": 2, "gap": 0,
    }
    assert records[1]["oracle_rounds"] is None and records[1]["gap"] is None


def test_search_examples():
    result = cmd_search(gen_star(4, 4, 4), Problem.gather(), EXTENDED)
    assert result.optimal_rounds == 2
    assert cmd_search(gen_star(4, 4, 4), Problem.gather(), EXTENDED, SearchBudget(max_states=1)).exhausted
    single = cmd_search(gen_complete(1, 3, 1), Problem.broadcast())
    assert single.optimal_rounds == 0 and len(single.witness) == 0


def test_demo_claims_reproduce():
    report = cmd_demo_claims()
    assert report.asymmetry and report.heuristic_failure and report.ok
    assert "asymmetry_reproduced=true" in report.text


# -- command line -------------------------------------------------------------


@pytest.fixture
def star_file(tmp_path):
    path = tmp_path / "star.topo"
    path.write_text(serialize_topology(gen_star(4, 4, 4)))
    return path


def test_cli_run(capsys):
    code = main(["run", "--generator", "star:4,4,4", "--algorithm", "multicore-greedy-broadcast"])
    out = capsys.readouterr().out
    assert code == 0
    assert "multicore-greedy-broadcast" in out and " 1 " in out


def test_cli_run_records_and_invalid_exit(capsys):
    code = main(
        ["run", "--generator", "star:4,4,4", "--algorithm", "multicore-greedy-broadcast", "--model", "classic",
         "--format", "records"]
    )
    (line,) = capsys.readouterr().out.splitlines()
    assert code == 1 and json.loads(line)["valid"] is False


def test_cli_validate_good_schedule(tmp_path, star_file, capsys):
    sched = tmp_path / "good.sched"
    sched.write_text(serialize_schedule(multicore_greedy_broadcast(gen_star(4, 4, 4))))
    code = main(["validate", "--topology", str(star_file), "--schedule", str(sched), "--problem", "broadcast"])
    assert code == 0
    assert "valid=true" in capsys.readouterr().out


def test_cli_validate_nic_overflow(tmp_path, capsys):
    topo = tmp_path / "t.topo"
    topo.write_text("machine 0 procs=2 nics=1\nmachine 1 procs=1 nics=1\nmachine 2 procs=1 nics=1\nlink 0 1\nlink 0 2\n")
    sched = tmp_path / "s.sched"
    sched.write_text("round\nxfer 0,0 -> 1,0 [root]\nxfer 0,1 -> 2,0 [root]\n")
    code = main(["validate", "--topology", str(topo), "--schedule", str(sched), "--problem", "broadcast"])
    out = capsys.readouterr().out
    assert code == 1
    assert "violation round=0 machine 0: 2 external transfers exceed degree 1" in out


def test_cli_validate_truncated(tmp_path, star_file, capsys):
    sched = tmp_path / "short.sched"
    sched.write_text("round\nxfer 0,0 -> 1,0 [root]\n")
    code = main(["validate", "--topology", str(star_file), "--schedule", str(sched), "--problem", "broadcast"])
    assert code == 1
    assert "completed=false" in capsys.readouterr().out


def test_cli_search_witness_validates(tmp_path, star_file, capsys):
    witness = tmp_path / "w.sched"
    code = main(["search", "--topology", str(star_file), "--problem", "gather", "--witness", str(witness)])
    assert code == 0 and "optimal_rounds=2" in capsys.readouterr().out
    code = main(["validate", "--topology", str(star_file), "--schedule", str(witness), "--problem", "gather"])
    assert code == 0


def test_cli_search_budget_exit_code(capsys):
    code = main(["search", "--generator", "star:4,4,4", "--problem", "gather", "--max-states", "1"])
    assert code == 3
    assert "exhausted" in capsys.readouterr().out


def test_cli_search_single_machine(tmp_path, capsys):
    witness = tmp_path / "w.sched"
    code = main(["search", "--generator", "complete:1,8,1", "--problem", "broadcast", "--witness", str(witness)])
    assert code == 0 and "optimal_rounds=0" in capsys.readouterr().out
    assert witness.read_text() == ""


def test_cli_gen_round_trips(tmp_path):
    out = tmp_path / "g.topo"
    assert main(["gen", "--generator", "overlap:3", "-o", str(out)]) == 0
    assert main(["run", "--topology", str(out), "--algorithm", "highest-degree-first-broadcast"]) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--generator", "star:4,4,4"],  # nothing to run
        ["run", "--algorithm", "binomial-broadcast"],  # no topology
        ["run", "--generator", "star:4,4,4", "--algorithm", "nope"],
        ["run", "--generator", "star:4,4,4", "--algorithm", "binomial-broadcast", "--problem", "gather"],
        ["search", "--generator", "star:4,4,4", "--problem", "gather", "--root", "9,9"],
        ["frobnicate"],
    ],
)
def test_cli_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_cli_topology_file_error_has_line(tmp_path, capsys):
    bad = tmp_path / "bad.topo"
    bad.write_text("machine 0 procs=1 nics=1\nmachine 1 procs=1\n")
    code = main(["run", "--topology", str(bad), "--algorithm", "binomial-broadcast"])
    assert code == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_schedule_file_error_has_line(tmp_path, star_file, capsys):
    sched = tmp_path / "bad.sched"
    sched.write_text("round\nxfer 0,0 -> 1,0 [root]\nsend 0,1 2,0\n")
    code = main(["validate", "--topology", str(star_file), "--schedule", str(sched), "--problem", "broadcast"])
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_cli_demo_claims(capsys):
    assert main(["demo-claims"]) == 0
    out = capsys.readouterr().out
    assert "heuristic_failure_reproduced=true" in out
