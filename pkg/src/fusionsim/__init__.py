"""fusionsim: a deterministic FaaS platform simulator plus a feedback-driven
optimizer that re-partitions an application's tasks into fused deployment
functions to cut request-response latency and billed cost.

Typical flow::

    from fusionsim import (
        builtin_app, singleton_setup, Workload, SteadyRate,
        PlatformConfig, run_simulation, summarize, run_loop, Objective,
    )

    app = builtin_app("tree")
    setup = singleton_setup(app.task_ids)
    log = run_simulation(app, setup, Workload(SteadyRate(1.0, 1000), seed=42))
    print(summarize(log, PlatformConfig()))

    report = run_loop(app, PlatformConfig(), Workload(SteadyRate(1.0, 1000)),
                      Objective("median_rr"))
    print(report.final)
"""

from .errors import (
    AppSpecError,
    FusionSimError,
    MutationError,
    NotationError,
    PartitionError,
    SimulationError,
    TraceError,
    TraceSchemaError,
)
from .model import (
    CallMode,
    FusionGroup,
    FusionSetup,
    Merge,
    SplitOut,
    apply_mutation,
    format_setup,
    parse_setup,
    singleton_setup,
)
from .sampling import Constant, LogNormal
from .workloads import (
    ApplicationSpec,
    ArrivalEvent,
    CallSpec,
    ColdStorm,
    ExternalCall,
    SteadyRate,
    TaskSpec,
    Workload,
    builtin_app,
    generate_arrivals,
    load_app_spec,
)
from .records import CallRecord, ExecutionRecord, Locality
from .simkernel import (
    FunctionInstance,
    InstanceState,
    PlatformConfig,
    billed_cost,
    billed_duration_ms,
    invocation_billed_duration,
    run_simulation,
)
from .trace import (
    MetricsSummary,
    TraceLog,
    ecdf_export,
    ecdf_points,
    load,
    nearest_rank,
    save,
    summarize,
    summarize_logs,
)
from .callgraph import CallEdge, CallGraph, TaskStats, classify_edge, infer_graph, to_dot
from .optimizer import (
    Converged,
    Deploy,
    MergeCandidate,
    Objective,
    SetupHistory,
    SplitCandidate,
    best_setup,
    check_limits,
    find_violations,
    propose_next,
)
from .controller import (
    Csp1Config,
    Csp1Mode,
    Csp1State,
    Decision,
    FeedbackLoop,
    OptimizationReport,
    csp1_step,
    optimize_sequence,
    run_loop,
)

__version__ = "0.1.0"
