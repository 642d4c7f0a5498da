"""The feedback loop: simulate windows, gate optimizer runs with CSP-1,
and redeploy setups until the heuristic converges.

The run-the-optimizer decision adapts the continuous sampling plan CSP-1:
while in the 100%-inspection phase the optimizer runs after every window;
once ``clearance_i`` consecutive windows showed a stable objective metric
(relative change <= delta), the controller switches to sampling and only
inspects a random fraction ``f`` of windows -- unless the metric degrades,
which drops it straight back to 100% inspection.

Redeployment is an instant setup switch. Each window simulates on a fresh
platform state (all instances cold at window start), mirroring a real
redeploy where new containers replace the old ones.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, TextIO

import numpy as np

from .callgraph import infer_graph
from .errors import FusionSimError, SimulationError
from .model import FusionSetup, parse_setup, singleton_setup
from .optimizer import Converged, Deploy, NextAction, Objective, SetupHistory, propose_next
from .simkernel import PlatformConfig, run_simulation
from .trace import MetricsSummary, TraceLog, summarize, summarize_logs
from .workloads import ApplicationSpec, Workload

DEFAULT_MIN_SAMPLES = 50


class Csp1Mode(Enum):
    INSPECT100 = "inspect100"
    SAMPLING = "sampling"


class Decision(Enum):
    RUN_OPTIMIZER = "run_optimizer"
    SKIP = "skip"


@dataclass(frozen=True)
class Csp1Config:
    """CSP-1 parameters: clearance windows, sampling fraction, and the
    relative metric change treated as degradation."""

    clearance_i: int = 5
    sampling_fraction_f: float = 0.2
    degradation_delta: float = 0.10
    window_invocations: int = 100

    def __post_init__(self) -> None:
        if self.clearance_i < 1:
            raise FusionSimError("clearance_i must be >= 1")
        if not 0.0 < self.sampling_fraction_f <= 1.0:
            raise FusionSimError("sampling_fraction_f must be in (0, 1]")
        if self.degradation_delta < 0:
            raise FusionSimError("degradation_delta must be >= 0")
        if self.window_invocations < 1:
            raise FusionSimError("window_invocations must be >= 1")


@dataclass(frozen=True)
class Csp1State:
    mode: Csp1Mode = Csp1Mode.INSPECT100
    consecutive_stable: int = 0
    last_metric: Optional[float] = None


def csp1_step(
    state: Csp1State,
    snapshot_metric: float,
    config: Csp1Config,
    rand: float,
) -> tuple[Csp1State, Decision]:
    """Advance the CSP-1 state machine by one monitoring snapshot.

    ``rand`` is a uniform draw in [0, 1) consumed only in sampling mode.
    Returns the new state and whether to run the optimizer now.
    """
    if snapshot_metric < 0:
        raise FusionSimError(f"snapshot metric must be >= 0, got {snapshot_metric}")
    if state.last_metric is None or state.last_metric == 0.0:
        change = 0.0 if snapshot_metric == state.last_metric else float("inf")
    else:
        change = abs(snapshot_metric - state.last_metric) / state.last_metric

    if state.mode is Csp1Mode.INSPECT100:
        stable = state.consecutive_stable + 1 if change <= config.degradation_delta else 0
        mode = Csp1Mode.SAMPLING if stable >= config.clearance_i else Csp1Mode.INSPECT100
        new_state = Csp1State(mode=mode, consecutive_stable=stable, last_metric=snapshot_metric)
        return new_state, Decision.RUN_OPTIMIZER

    # Sampling mode: inspect a random fraction, or always on degradation.
    if change > config.degradation_delta:
        new_state = Csp1State(
            mode=Csp1Mode.INSPECT100, consecutive_stable=0, last_metric=snapshot_metric
        )
        return new_state, Decision.RUN_OPTIMIZER
    new_state = Csp1State(
        mode=Csp1Mode.SAMPLING,
        consecutive_stable=state.consecutive_stable,
        last_metric=snapshot_metric,
    )
    decision = Decision.RUN_OPTIMIZER if rand < config.sampling_fraction_f else Decision.SKIP
    return new_state, decision


@dataclass(frozen=True)
class WindowResult:
    """What one control window observed and decided."""

    window_index: int
    setup_key: str
    window_metrics: MetricsSummary
    metric: float
    decision: Decision
    action: Optional[NextAction]


@dataclass
class ReportEntry:
    setup: str
    action: str  # "initial" or the mutation that produced this setup
    metrics: MetricsSummary

    def to_dict(self) -> dict:
        return {"setup": self.setup, "action": self.action, "metrics": self.metrics.to_dict()}


@dataclass
class OptimizationReport:
    """Every tested setup in order, plus the converged winner."""

    app: str
    objective: str
    seed: int
    workload: str
    windows: int
    converged: bool
    final: str
    entries: list[ReportEntry]

    def to_dict(self) -> dict:
        return {
            "app": self.app,
            "objective": self.objective,
            "seed": self.seed,
            "workload": self.workload,
            "windows": self.windows,
            "converged": self.converged,
            "final": self.final,
            "setups": [entry.to_dict() for entry in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationReport":
        return cls(
            app=data["app"],
            objective=data["objective"],
            seed=data["seed"],
            workload=data["workload"],
            windows=data["windows"],
            converged=data["converged"],
            final=data["final"],
            entries=[
                ReportEntry(
                    setup=e["setup"],
                    action=e["action"],
                    metrics=MetricsSummary.from_dict(e["metrics"]),
                )
                for e in data["setups"]
            ],
        )


def describe_step(parent: FusionSetup, child: FusionSetup) -> str:
    """Human-readable mutation turning ``parent`` into ``child``."""
    old = set(parent.groups)
    new = set(child.groups)
    added = new - old
    removed = old - new
    if len(removed) == 2 and len(added) == 1:
        a, b = sorted(removed, key=lambda g: g.tasks[0])
        return f"merge {a}+{b}"
    if len(removed) == 1 and len(added) == 2:
        singles = [g for g in added if len(g.tasks) == 1]
        if singles:
            return f"split {singles[0].tasks[0]} out of {next(iter(removed))}"
    return "redeploy"


def _window_seed(seed: int, window_index: int) -> int:
    return int(np.random.SeedSequence((seed, window_index)).generate_state(1, np.uint64)[0])


class FeedbackLoop:
    """Stepwise driver of the control loop; ``run()`` goes to convergence.

    The application is held as a plain attribute so callers can inject a
    changed app mid-run (e.g. a task whose compute time doubled) and watch
    CSP-1 fall back to 100% inspection.
    """

    def __init__(
        self,
        app: ApplicationSpec,
        platform: PlatformConfig,
        workload_template: Workload,
        objective: Objective,
        csp1: Csp1Config = Csp1Config(),
        seed: int = 42,
        min_samples: int = DEFAULT_MIN_SAMPLES,
        force_split_on_limit: bool = False,
        progress: Optional[TextIO] = None,
    ):
        self.app = app
        self.platform = platform
        self.workload_template = workload_template
        self.objective = objective
        self.csp1 = csp1
        self.seed = seed
        self.min_samples = min_samples
        self.force_split_on_limit = force_split_on_limit
        self.progress = progress

        self.active: FusionSetup = singleton_setup(app.task_ids)
        self.csp1_state = Csp1State()
        self.history = SetupHistory()
        self.converged = False
        self.window_index = 0
        self._rng = np.random.default_rng(seed)
        self._setup_logs: dict[str, list[TraceLog]] = {}
        self._actions: dict[str, str] = {self.active.key: "initial"}
        self._order: list[str] = []

    # -- per-setup traces ----------------------------------------------------

    @property
    def setup_order(self) -> list[str]:
        return list(self._order)

    def logs_for(self, setup_key: str) -> list[TraceLog]:
        return list(self._setup_logs.get(setup_key, []))

    def all_logs(self) -> list[TraceLog]:
        logs: list[TraceLog] = []
        for key in self._order:
            logs.extend(self._setup_logs[key])
        return logs

    # -- the loop -------------------------------------------------------------

    def run_window(self) -> WindowResult:
        """Simulate one window, update history, and maybe run the optimizer."""
        workload = replace(
            self.workload_template, seed=_window_seed(self.seed, self.window_index)
        )
        log = run_simulation(self.app, self.active, workload, self.platform)
        key = self.active.key
        if key not in self._setup_logs:
            self._setup_logs[key] = []
            self._order.append(key)
        self._setup_logs[key].append(log)

        try:
            window_metrics = summarize(log, self.platform)
        except FusionSimError as exc:
            raise SimulationError(
                f"window {self.window_index} on setup {key} produced no successful "
                f"invocations: {exc}"
            ) from exc
        cumulative = summarize_logs(self._setup_logs[key], self.platform)
        if cumulative.n_invocations >= self.min_samples:
            self.history.record(key, cumulative)

        baseline = self.history.first() if len(self.history) else window_metrics
        metric = self.objective.score(window_metrics, baseline)
        self.csp1_state, decision = csp1_step(
            self.csp1_state, metric, self.csp1, float(self._rng.random())
        )

        action: Optional[NextAction] = None
        if decision is Decision.RUN_OPTIMIZER and len(self.history) > 0:
            graph = infer_graph(self.all_logs())
            action = propose_next(
                self.history,
                graph,
                self.objective,
                platform=self.platform,
                force_split_on_limit=self.force_split_on_limit,
            )
            if isinstance(action, Deploy):
                self._actions[action.setup.key] = describe_step(self.active, action.setup)
                self.active = action.setup
            else:
                self.converged = True
                self.active = action.best

        result = WindowResult(
            window_index=self.window_index,
            setup_key=key,
            window_metrics=window_metrics,
            metric=metric,
            decision=decision,
            action=action,
        )
        if self.progress is not None:
            print(
                f"[window {self.window_index}] setup={key} rr_med={window_metrics.rr_med:g} "
                f"decision={decision.value}",
                file=self.progress,
            )
        self.window_index += 1
        return result

    @property
    def done(self) -> bool:
        return self.converged and self.csp1_state.mode is Csp1Mode.SAMPLING

    def run(self, max_windows: int = 10_000) -> OptimizationReport:
        """Run windows until converged and CSP-1 has cleared into sampling."""
        while not self.done:
            if self.window_index >= max_windows:
                raise SimulationError(
                    f"loop did not settle within {max_windows} windows "
                    f"(converged={self.converged}, csp1={self.csp1_state.mode.value})"
                )
            self.run_window()
        return self.build_report()

    def build_report(self) -> OptimizationReport:
        entries = [
            ReportEntry(
                setup=key,
                action=self._actions.get(key, "redeploy"),
                metrics=summarize_logs(self._setup_logs[key], self.platform),
            )
            for key in self._order
        ]
        return OptimizationReport(
            app=self.app.name,
            objective=self.objective.label(),
            seed=self.seed,
            workload=self.workload_template.kind.label(),
            windows=self.window_index,
            converged=self.converged,
            final=self.active.key,
            entries=entries,
        )


def run_loop(
    app: ApplicationSpec,
    platform: PlatformConfig,
    workload_template: Workload,
    objective: Objective,
    csp1: Csp1Config = Csp1Config(),
    seed: int = 42,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    force_split_on_limit: bool = False,
    progress: Optional[TextIO] = sys.stderr,
    max_windows: int = 10_000,
) -> OptimizationReport:
    """Convenience wrapper: build a :class:`FeedbackLoop` and run it out."""
    loop = FeedbackLoop(
        app,
        platform,
        workload_template,
        objective,
        csp1=csp1,
        seed=seed,
        min_samples=min_samples,
        force_split_on_limit=force_split_on_limit,
        progress=progress,
    )
    return loop.run(max_windows=max_windows)


def optimize_sequence(
    app: ApplicationSpec,
    platform: PlatformConfig,
    workload_template: Workload,
    objective: Objective,
    seed: int = 42,
) -> tuple[list[str], FusionSetup]:
    """Batch variant without CSP-1 gating: test each proposed setup once,
    straight to convergence. Returns (tested setup keys in order, winner)."""
    active = singleton_setup(app.task_ids)
    history = SetupHistory()
    logs: list[TraceLog] = []
    order: list[str] = []
    window = 0
    while True:
        workload = replace(workload_template, seed=_window_seed(seed, window))
        log = run_simulation(app, active, workload, platform)
        logs.append(log)
        order.append(active.key)
        history.record(active.key, summarize(log, platform))
        action = propose_next(history, infer_graph(logs), objective)
        if isinstance(action, Converged):
            return order, action.best
        active = action.setup
        window += 1
