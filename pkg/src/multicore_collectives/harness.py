"""Experiment runner behind the command line: run, validate, search, demo-claims.

Rows are computed sequentially and in config order, so output is
deterministic for deterministic inputs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .algorithms import ALGORITHMS, AlgorithmId, build_schedule, highest_degree_first_broadcast
from .algorithms import multicore_gather, multicore_greedy_broadcast
from .model import (
    EXTENDED,
    ModelKind,
    Problem,
    ProblemKind,
    Schedule,
    ValidationReport,
    run_schedule,
)
from .schedule_io import parse_schedule, serialize_schedule
from .search import SearchBudget, SearchResult, optimal_rounds
from .topology import (
    ClusterTopology,
    ProcessRef,
    gen_complete,
    gen_overlap_family,
    gen_path,
    gen_random,
    gen_star,
    parse_topology,
)

GENERATORS = {
    "complete": (gen_complete, (int, int, int)),
    "star": (gen_star, (int, int, int)),
    "path": (gen_path, (int, int, int)),
    "overlap": (gen_overlap_family, (int,)),
    "random": (gen_random, (int, int, int, float)),
}


def generate_topology(spec: str, seed: int = 0) -> ClusterTopology:
    """Build a topology from ``name:arg,arg,...`` (``random`` also takes ``seed``)."""
    name, _, rest = spec.partition(":")
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")
    fn, types = GENERATORS[name]
    raw = [x.strip() for x in rest.split(",") if x.strip()]
    if name == "path" and 1 <= len(raw) < 3:
        raw += ["1"] * (3 - len(raw))
    if len(raw) != len(types):
        raise ValueError(f"generator {name} takes {len(types)} arguments, got {len(raw)}")
    try:
        args = [ty(x) for ty, x in zip(types, raw)]
    except ValueError:
        raise ValueError(f"bad generator arguments {rest!r}") from None
    if name == "random":
        args.append(seed)
    return fn(*args)


def load_topology(path: str | Path) -> ClusterTopology:
    return parse_topology(Path(path).read_text())


@dataclass
class ExperimentConfig:
    topology: ClusterTopology
    problem: Problem
    algorithms: list[AlgorithmId] = field(default_factory=list)
    models: list[ModelKind] = field(default_factory=list)  # empty: each algorithm's own model
    oracle: bool = False
    budget: SearchBudget = field(default_factory=SearchBudget)
    label: str = "topology"
    output: str = "human"

    def __post_init__(self) -> None:
        if not self.algorithms and not self.oracle:
            raise ValueError("enable at least one algorithm or the oracle")
        if self.output not in ("human", "records"):
            raise ValueError(f"unknown output format {self.output!r}")
        for a in self.algorithms:
            if ALGORITHMS[a].problem is not self.problem.kind:
                raise ValueError(f"{a.value} solves {ALGORITHMS[a].problem.value}, not {self.problem.kind.value}")


@dataclass
class ComparisonRow:
    topology: str
    algorithm: str
    model: str
    rounds: int | None
    external_messages: int
    valid: bool
    completed: bool
    oracle_rounds: int | None = None

    @property
    def gap(self) -> int | None:
        """Rounds above the optimum; only defined for valid, completed rows."""
        if self.oracle_rounds is None or self.rounds is None or not (self.valid and self.completed):
            return None
        return self.rounds - self.oracle_rounds

    def to_record(self) -> dict:
        return {**asdict(self), "gap": self.gap}


def _model_name(model: ModelKind) -> str:
    return model.name.lower()


def _round_trip(t: ClusterTopology, p: Problem, s: Schedule, model: ModelKind, report: ValidationReport) -> None:
    again = run_schedule(t, p, parse_schedule(serialize_schedule(s)), model)
    if again != report:
        raise RuntimeError("schedule changed meaning after a round trip through the file format")


def cmd_run(config: ExperimentConfig) -> list[ComparisonRow]:
    t, p = config.topology, config.problem
    oracle_cache: dict[ModelKind, SearchResult] = {}

    def oracle(model: ModelKind) -> int | None:
        if not config.oracle:
            return None
        if model not in oracle_cache:
            oracle_cache[model] = optimal_rounds(t, p, model, config.budget)
        return oracle_cache[model].optimal_rounds

    rows: list[ComparisonRow] = []
    for algorithm in config.algorithms:
        schedule = build_schedule(algorithm, t, p)
        for model in config.models or [ALGORITHMS[algorithm].model]:
            report = run_schedule(t, p, schedule, model)
            if report.valid:
                _round_trip(t, p, schedule, model, report)
            rows.append(
                ComparisonRow(
                    config.label,
                    algorithm.value,
                    _model_name(model),
                    report.rounds_used,
                    report.external_messages,
                    report.valid,
                    report.completed,
                    oracle(model),
                )
            )
    if not config.algorithms:
        for model in config.models or [EXTENDED]:
            result = optimal_rounds(t, p, model, config.budget)
            witness = result.witness
            report = run_schedule(t, p, witness, model) if witness is not None else None
            rows.append(
                ComparisonRow(
                    config.label,
                    "oracle",
                    _model_name(model),
                    result.optimal_rounds,
                    report.external_messages if report else 0,
                    report.valid if report else False,
                    report.completed if report else False,
                    result.optimal_rounds,
                )
            )
    return rows


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


COLUMNS = ("topology", "algorithm", "model", "rounds", "external_messages", "valid", "completed", "oracle_rounds", "gap")


def format_table(rows: list[ComparisonRow]) -> str:
    body = [[_cell(r.to_record()[c]) for c in COLUMNS] for r in rows]
    widths = [max(len(c), *(len(line[i]) for line in body)) if body else len(c) for i, c in enumerate(COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(COLUMNS, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(line, widths)).rstrip() for line in body]
    return "\n".join(lines) + "\n"


def format_records(rows: list[ComparisonRow]) -> str:
    """One JSON object per line; keys are the table columns."""
    return "".join(json.dumps(r.to_record(), sort_keys=True) + "\n" for r in rows)


def render_rows(rows: list[ComparisonRow], output: str = "human") -> str:
    return format_records(rows) if output == "records" else format_table(rows)


def cmd_validate(t: ClusterTopology, s: Schedule, p: Problem, model: ModelKind = EXTENDED) -> ValidationReport:
    return run_schedule(t, p, s, model)


def cmd_search(t: ClusterTopology, p: Problem, model: ModelKind = EXTENDED, budget: SearchBudget | None = None) -> SearchResult:
    return optimal_rounds(t, p, model, budget)


def format_search(result: SearchResult, output: str = "human") -> str:
    record = {
        "optimal_rounds": result.optimal_rounds,
        "exhausted": result.exhausted,
        "states_explored": result.states_explored,
        "reason": result.reason,
    }
    if output == "records":
        return json.dumps(record, sort_keys=True) + "\n"
    if result.exhausted:
        head = f"optimal_rounds=exhausted ({result.reason})"
    else:
        head = f"optimal_rounds={result.optimal_rounds}"
    return f"{head}\nstates_explored={result.states_explored}\n"


@dataclass
class ClaimReport:
    text: str
    asymmetry: bool
    heuristic_failure: bool

    @property
    def ok(self) -> bool:
        return self.asymmetry and self.heuristic_failure


def _rounds(t: ClusterTopology, p: Problem, s: Schedule) -> int | None:
    report = run_schedule(t, p, s, EXTENDED)
    return report.rounds_used if report.valid and report.completed else None


def cmd_demo_claims(budget: SearchBudget | None = None) -> ClaimReport:
    """Broadcast/gather asymmetry on stars, and the degree heuristic failing on the overlap family."""
    budget = budget or SearchBudget()
    lines = ["# broadcast vs gather, star(n,n,n), extended model", "n  oracle_broadcast  oracle_gather  multicore_gather"]
    asymmetry = True
    for n in (2, 3, 4):
        t = gen_star(n, n, n)
        b = optimal_rounds(t, Problem.broadcast(), EXTENDED, budget).optimal_rounds
        g = optimal_rounds(t, Problem.gather(), EXTENDED, budget).optimal_rounds
        mg = _rounds(t, Problem.gather(), multicore_gather(t))
        asymmetry &= b is not None and g is not None and g > b
        lines.append(f"{n}  {_cell(b):16}  {_cell(g):13}  {_cell(mg)}")
    lines.append(f"asymmetry_reproduced={str(asymmetry).lower()}")
    lines += ["", "# broadcast on the overlap family, extended model", "k  hdf  greedy  oracle"]
    failure = False
    p = Problem.broadcast()
    for k in (2, 3):
        t = gen_overlap_family(k)
        hdf = _rounds(t, p, highest_degree_first_broadcast(t))
        greedy = _rounds(t, p, multicore_greedy_broadcast(t))
        best = optimal_rounds(t, p, EXTENDED, budget).optimal_rounds
        if None not in (hdf, greedy, best) and hdf > best and greedy - best <= hdf - best:
            failure = True
        lines.append(f"{k}  {_cell(hdf):3}  {_cell(greedy):6}  {_cell(best)}")
    lines.append(f"heuristic_failure_reproduced={str(failure).lower()}")
    return ClaimReport("\n".join(lines) + "\n", asymmetry, failure)


def problem_from_name(name: str, root: tuple[int, int] = (0, 0), t: ClusterTopology | None = None) -> Problem:
    kind = ProblemKind(name)
    if t is not None and ProcessRef(*root) not in t.processes():
        raise ValueError(f"root {root[0]},{root[1]} is not a process of the topology")
    if kind is ProblemKind.BROADCAST:
        return Problem.broadcast(root)
    if kind is ProblemKind.GATHER:
        return Problem.gather(root)
    return Problem.all_to_all()
