"""Command line: ``multicore-collectives {run,validate,search,demo-claims,gen}``.

Exit codes: 0 success, 1 invalid schedule or claim not reproduced,
2 usage/input error, 3 search budget exhausted.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .algorithms import ALGORITHMS, AlgorithmId, DisconnectedError
from .harness import (
    ExperimentConfig,
    cmd_demo_claims,
    cmd_run,
    cmd_search,
    cmd_validate,
    format_search,
    generate_topology,
    load_topology,
    problem_from_name,
    render_rows,
)
from .model import CLASSIC, EXTENDED, ProblemKind
from .schedule_io import ScheduleSyntaxError, format_report, parse_schedule, serialize_schedule
from .search import SearchBudget
from .topology import TopologyError, serialize_topology

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

MODELS = {"classic": CLASSIC, "extended": EXTENDED}


class UsageError(Exception):
    pass


def _split(values: list[str] | None) -> list[str]:
    return [v.strip() for item in values or [] for v in item.split(",") if v.strip()]


def _root(text: str) -> tuple[int, int]:
    try:
        m, i = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m,i but got {text!r}") from None
    return m, i


def _topology(args):
    if bool(args.topology) == bool(args.generator):
        raise UsageError("give exactly one of --topology FILE or --generator SPEC")
    if args.topology:
        return load_topology(args.topology), Path(args.topology).stem
    label = args.generator + (f"@{args.seed}" if args.generator.startswith("random") else "")
    return generate_topology(args.generator, args.seed), label


def _budget(args) -> SearchBudget:
    return SearchBudget(args.max_rounds, args.max_states, args.time_limit)


def _add_topology_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", help="topology file")
    p.add_argument("--generator", help="complete:M,P,N | star:P,N,L | path:M[,P,N] | overlap:K | random:M,P,N,PROB")
    p.add_argument("--seed", type=int, default=0, help="seed for the random generator")


def _add_problem_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--problem", choices=[k.value for k in ProblemKind], required=required)
    p.add_argument("--root", type=_root, default=(0, 0), help="root process as m,i (default 0,0)")


def _add_budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-rounds", type=int, default=SearchBudget.max_rounds)
    p.add_argument("--max-states", type=int, default=SearchBudget.max_states)
    p.add_argument("--time-limit", type=float, default=SearchBudget.time_limit, help="seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multicore-collectives", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run algorithms (and optionally the oracle) on one topology")
    _add_topology_flags(run)
    _add_problem_flags(run, required=False)
    run.add_argument("--algorithm", action="append", help=f"one or more of: {', '.join(a.value for a in AlgorithmId)}")
    run.add_argument("--model", action="append", help="classic and/or extended (default: the algorithm's own)")
    run.add_argument("--oracle", action="store_true", help="also compute the optimum and the gap")
    _add_budget_flags(run)
    run.add_argument("--format", choices=["human", "records"], default="human")

    val = sub.add_parser("validate", help="check a schedule file")
    _add_topology_flags(val)
    val.add_argument("--schedule", required=True, help="schedule file")
    _add_problem_flags(val)
    val.add_argument("--model", choices=list(MODELS), default="extended")

    search = sub.add_parser("search", help="find an optimal schedule by exhaustive search")
    _add_topology_flags(search)
    _add_problem_flags(search)
    search.add_argument("--model", choices=list(MODELS), default="extended")
    _add_budget_flags(search)
    search.add_argument("--witness", help="write the optimal schedule here")
    search.add_argument("--format", choices=["human", "records"], default="human")

    demo = sub.add_parser("demo-claims", help="reproduce the asymmetry and heuristic-failure demonstrations")
    _add_budget_flags(demo)

    gen = sub.add_parser("gen", help="write a generated topology")
    gen.add_argument("--generator", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", help="file to write (default stdout)")
    return parser


def _run(args) -> int:
    t, label = _topology(args)
    try:
        algorithms = [AlgorithmId(a) for a in _split(args.algorithm)]
    except ValueError as err:
        raise UsageError(str(err)) from None
    try:
        models = [MODELS[m] for m in _split(args.model)]
    except KeyError as err:
        raise UsageError(f"unknown model {err.args[0]!r}") from None
    name = args.problem
    if name is None:
        kinds = {ALGORITHMS[a].problem for a in algorithms}
        if len(kinds) != 1:
            raise UsageError("--problem is required unless all algorithms solve the same problem")
        name = kinds.pop().value
    config = ExperimentConfig(
        t,
        problem_from_name(name, args.root, t),
        algorithms,
        models,
        args.oracle,
        _budget(args),
        label,
        args.format,
    )
    rows = cmd_run(config)
    sys.stdout.write(render_rows(rows, args.format))
    return EXIT_OK if all(r.valid and r.completed for r in rows) else EXIT_FAIL


def _validate(args) -> int:
    t, _ = _topology(args)
    schedule = parse_schedule(Path(args.schedule).read_text())
    report = cmd_validate(t, schedule, problem_from_name(args.problem, args.root, t), MODELS[args.model])
    sys.stdout.write(format_report(report))
    return EXIT_OK if report.valid and report.completed else EXIT_FAIL


def _search(args) -> int:
    t, _ = _topology(args)
    result = cmd_search(t, problem_from_name(args.problem, args.root, t), MODELS[args.model], _budget(args))
    sys.stdout.write(format_search(result, args.format))
    if result.exhausted:
        return EXIT_BUDGET
    if args.witness:
        Path(args.witness).write_text(serialize_schedule(result.witness))
    return EXIT_OK


def _demo(args) -> int:
    report = cmd_demo_claims(_budget(args))
    sys.stdout.write(report.text)
    return EXIT_OK if report.ok else EXIT_FAIL


def _gen(args) -> int:
    text = serialize_topology(generate_topology(args.generator, args.seed))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": _run, "validate": _validate, "search": _search, "demo-claims": _demo, "gen": _gen}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, TopologyError, ScheduleSyntaxError, DisconnectedError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
