"""The fusion-setup improvement heuristic.

Given the metrics history and the inferred call graph, the optimizer:

1. picks the best setup tested so far under the configured objective,
2. enumerates its rule violations --
   *split*: a task in a multi-task group with only async (or no) calls
   between it and its group mates should move to its own group;
   *merge*: a sync call between tasks in different groups should pull those
   groups together --
3. proposes the first mutation whose resulting setup has not been tested
   yet, or declares convergence when all candidates are exhausted.

One mutation per iteration; a setup is never deployed twice. The fixed point
of this process on a stable application is the partition into weakly
connected components of the sync-edge subgraph.

Tie-breaking: equal objective scores resolve to the *latest*-tested setup.
In a noise-free simulation a merge hanging off an async branch leaves
request-response latency exactly unchanged, and resolving ties toward the
newer setup is what keeps the walk moving through those plateaus (it also
reproduces the observed benchmark progressions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .callgraph import CallGraph
from .errors import FusionSimError
from .model import CallMode, FusionSetup, Merge, SplitOut, apply_mutation
from .trace import MetricsSummary

OBJECTIVE_KINDS = ("median_rr", "avg_rr", "p99_rr", "avg_billed", "weighted")


@dataclass(frozen=True)
class Objective:
    """What "best" means: a latency/cost statistic or a weighted blend.

    The weighted score is ``w_latency * rr_med + w_cost * billed_avg``, each
    term normalized by the first-tested setup's value so the weights are
    unit-free.
    """

    kind: str = "median_rr"
    w_latency: float = 0.0
    w_cost: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in OBJECTIVE_KINDS:
            raise FusionSimError(
                f"unknown objective {self.kind!r} (expected one of {', '.join(OBJECTIVE_KINDS)})"
            )
        if self.kind == "weighted":
            if self.w_latency < 0 or self.w_cost < 0:
                raise FusionSimError("weighted objective weights must be >= 0")
            if self.w_latency == 0 and self.w_cost == 0:
                raise FusionSimError("weighted objective needs at least one non-zero weight")

    def score(self, metrics: MetricsSummary, baseline: MetricsSummary) -> float:
        if self.kind == "median_rr":
            return metrics.rr_med
        if self.kind == "avg_rr":
            return metrics.rr_avg
        if self.kind == "p99_rr":
            return metrics.rr_p99
        if self.kind == "avg_billed":
            return metrics.billed_avg
        rr_norm = metrics.rr_med / baseline.rr_med if baseline.rr_med else metrics.rr_med
        billed_norm = (
            metrics.billed_avg / baseline.billed_avg if baseline.billed_avg else metrics.billed_avg
        )
        return self.w_latency * rr_norm + self.w_cost * billed_norm

    @classmethod
    def parse(cls, text: str) -> "Objective":
        """Parse ``median_rr`` / ``avg_rr`` / ``p99_rr`` / ``avg_billed`` /
        ``weighted:WL,WC``."""
        if text.startswith("weighted:"):
            parts = text[len("weighted:"):].split(",")
            if len(parts) != 2:
                raise FusionSimError(f"weighted objective expects weighted:WL,WC, got {text!r}")
            return cls(kind="weighted", w_latency=float(parts[0]), w_cost=float(parts[1]))
        return cls(kind=text)

    def label(self) -> str:
        if self.kind == "weighted":
            return f"weighted:{self.w_latency:g},{self.w_cost:g}"
        return self.kind


class SetupHistory:
    """Setups tested so far, in first-tested order, with their metrics."""

    def __init__(self) -> None:
        self._entries: dict[str, MetricsSummary] = {}
        self._order: list[str] = []

    def record(self, setup_key: str, metrics: MetricsSummary) -> None:
        """Insert or refresh one setup's metrics; order is fixed at first insert."""
        if setup_key not in self._entries:
            self._order.append(setup_key)
        self._entries[setup_key] = metrics

    def __contains__(self, setup_key: str) -> bool:
        return setup_key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(self._order)

    def metrics(self, setup_key: str) -> MetricsSummary:
        return self._entries[setup_key]

    def first(self) -> MetricsSummary:
        return self._entries[self._order[0]]

    def items_in_order(self) -> list[tuple[str, MetricsSummary]]:
        return [(key, self._entries[key]) for key in self._order]


@dataclass(frozen=True)
class SplitCandidate:
    """A task with no sync ties to its group mates should be split out."""

    group: tuple[str, ...]
    task: str

    def as_mutation(self) -> SplitOut:
        return SplitOut(self.task)


@dataclass(frozen=True)
class MergeCandidate:
    """A sync call crossing group boundaries; the two groups should merge."""

    group_a: tuple[str, ...]
    group_b: tuple[str, ...]
    caller: str
    callee: str

    def as_mutation(self) -> Merge:
        return Merge(self.caller, self.callee)


Violation = Union[SplitCandidate, MergeCandidate]


@dataclass(frozen=True)
class Deploy:
    setup: FusionSetup


@dataclass(frozen=True)
class Converged:
    best: FusionSetup


NextAction = Union[Deploy, Converged]


def best_setup(history: SetupHistory, objective: Objective) -> str:
    """Setup with the minimal objective score; ties go to the latest-tested."""
    if len(history) == 0:
        raise FusionSimError("cannot pick a best setup from an empty history")
    baseline = history.first()
    best_key: Optional[str] = None
    best_score = float("inf")
    for key, metrics in history.items_in_order():
        score = objective.score(metrics, baseline)
        if score <= best_score:
            best_key = key
            best_score = score
    return best_key


def find_violations(setup: FusionSetup, graph: CallGraph) -> list[Violation]:
    """Rule violations of a setup against the observed graph.

    Split candidates come first (alphabetical by task), then merge candidates
    (alphabetical by (caller, callee), one per group pair).
    """
    mode: dict[tuple[str, str], CallMode] = {
        (e.caller, e.callee): e.mode for e in graph.edges
    }

    violations: list[Violation] = []
    split_tasks: list[SplitCandidate] = []
    for group in setup.groups:
        if len(group.tasks) < 2:
            continue
        for task in group.tasks:
            has_sync_tie = any(
                mode.get((task, other)) is CallMode.SYNC
                or mode.get((other, task)) is CallMode.SYNC
                for other in group.tasks
                if other != task
            )
            if not has_sync_tie:
                split_tasks.append(SplitCandidate(group=group.tasks, task=task))
    split_tasks.sort(key=lambda v: v.task)
    violations.extend(split_tasks)

    seen_pairs: set[frozenset[tuple[str, ...]]] = set()
    for caller, callee in sorted(graph.sync_edges()):
        group_a = setup.group_of(caller).tasks
        group_b = setup.group_of(callee).tasks
        if group_a == group_b:
            continue
        pair = frozenset((group_a, group_b))
        if pair in seen_pairs:
            continue
        seen_pairs.add(pair)
        violations.append(
            MergeCandidate(group_a=group_a, group_b=group_b, caller=caller, callee=callee)
        )
    return violations


@dataclass(frozen=True)
class LimitViolation:
    """A group predicted to exceed a platform limit."""

    group: tuple[str, ...]
    kind: str  # "duration" or "memory"
    predicted: float
    limit: float


def check_limits(setup: FusionSetup, graph: CallGraph, platform) -> list[LimitViolation]:
    """Flag groups predicted to exceed platform duration/memory limits.

    Advisory only: the heuristic ignores these unless ``force_split_on_limit``
    is enabled in :func:`propose_next`. Predictions use observed per-task
    means; tasks never observed count as zero.
    """
    flagged: list[LimitViolation] = []
    for group in setup.groups:
        stats = [graph.nodes[t] for t in group.tasks if t in graph.nodes]
        if platform.limit_max_duration_ms is not None:
            predicted = sum(s.mean_duration_ms for s in stats)
            if predicted > platform.limit_max_duration_ms:
                flagged.append(
                    LimitViolation(group.tasks, "duration", predicted, platform.limit_max_duration_ms)
                )
        if platform.limit_max_memory_mb is not None:
            memories = [s.mean_memory_mb for s in stats]
            if memories:
                predicted = (
                    max(memories) if platform.memory_model == "max" else sum(memories)
                )
                if predicted > platform.limit_max_memory_mb:
                    flagged.append(
                        LimitViolation(group.tasks, "memory", predicted, platform.limit_max_memory_mb)
                    )
    return flagged


def propose_next(
    history: SetupHistory,
    graph: CallGraph,
    objective: Objective,
    platform=None,
    force_split_on_limit: bool = False,
) -> NextAction:
    """Next action of the heuristic: deploy the first untested improvement of
    the best-known setup, or declare convergence."""
    from .model import parse_setup

    best_key = best_setup(history, objective)
    best = parse_setup(best_key)

    candidates: list[FusionSetup] = []
    if force_split_on_limit and platform is not None:
        for violation in check_limits(best, graph, platform):
            if len(violation.group) < 2:
                continue
            # Split out the most expensive member first.
            heaviest = max(
                violation.group,
                key=lambda t: (
                    graph.nodes[t].mean_duration_ms if t in graph.nodes else 0.0,
                    t,
                ),
            )
            candidates.append(apply_mutation(best, SplitOut(heaviest)))
    for violation in find_violations(best, graph):
        candidates.append(apply_mutation(best, violation.as_mutation()))

    for candidate in candidates:
        if candidate.key not in history:
            return Deploy(candidate)
    return Converged(best)
