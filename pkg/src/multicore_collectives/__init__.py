"""Round-based collective schedules for clusters of multi-core machines."""

from .algorithms import (
    ALGORITHMS,
    AlgorithmId,
    DisconnectedError,
    binomial_broadcast,
    build_schedule,
    hierarchical_broadcast,
    highest_degree_first_broadcast,
    inverse_binomial_gather,
    invert_schedule,
    multicore_gather,
    multicore_greedy_broadcast,
    naive_all_to_all,
)
from .canonical import canonical_state
from .logp import LogPParams, logp_time
from .model import (
    CLASSIC,
    EXTENDED,
    ROOT,
    Assemble,
    Datum,
    ExternalTransfer,
    KnowledgeState,
    LocalWrite,
    ModelKind,
    Problem,
    ProblemKind,
    RoundSchedule,
    RoundViolation,
    Schedule,
    ValidationReport,
    Violation,
    apply_round,
    classic_to_extended,
    initial_state,
    is_complete,
    run_schedule,
)
from .schedule_io import parse_schedule, serialize_schedule
from .search import SearchBudget, SearchResult, enumerate_round_actions, optimal_rounds
from .topology import (
    ClusterTopology,
    Link,
    MachineSpec,
    ProcessRef,
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

__version__ = "0.1.0"
