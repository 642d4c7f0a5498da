"""Task-level call-graph inference from traces.

The optimizer never sees the application definition; it works purely from
monitored invocation patterns. This module rebuilds the task call graph from
execution records, annotating nodes with duration/memory statistics and
edges with call counts, observed latencies, and a sync/async classification.

Classification is sync-dominant: a single observed synchronous call marks an
edge Sync, because merging on sync evidence is the direction that removes
double billing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import TraceError
from .model import CallMode
from .records import Locality
from .trace import TraceLog


@dataclass(frozen=True)
class CallEdge:
    """Aggregated observations of calls from one task to another."""

    caller: str
    callee: str
    mode: CallMode
    count: int
    sync_count: int
    async_count: int
    mean_callee_latency_ms: float


@dataclass(frozen=True)
class TaskStats:
    """Observed behavior of one task across all executions."""

    task: str
    invocation_count: int
    mean_duration_ms: float
    mean_memory_mb: float


@dataclass(frozen=True)
class CallGraph:
    """Observed tasks and calls; contains only what the traces show."""

    nodes: dict[str, TaskStats]
    edges: tuple[CallEdge, ...]

    def edge(self, caller: str, callee: str) -> CallEdge:
        for e in self.edges:
            if e.caller == caller and e.callee == callee:
                return e
        raise KeyError(f"no edge {caller} -> {callee}")

    def sync_edges(self) -> list[tuple[str, str]]:
        return [(e.caller, e.callee) for e in self.edges if e.mode is CallMode.SYNC]


def classify_edge(sync_count: int, async_count: int) -> CallMode:
    """Sync-dominant rule: any sync observation makes the edge Sync."""
    if sync_count + async_count < 1:
        raise TraceError("cannot classify an edge with no observations")
    return CallMode.SYNC if sync_count >= 1 else CallMode.ASYNC


def infer_graph(logs: Iterable[TraceLog]) -> CallGraph:
    """Aggregate one or more traces (any setups, one application) into a graph."""
    logs = list(logs)
    if not logs:
        raise TraceError("cannot infer a call graph from no traces")
    apps = {log.app_name for log in logs}
    if len(apps) != 1:
        raise TraceError(f"inconsistent application labels in traces: {sorted(apps)}")

    # Node stats come from per-task run spans; memory from the hosting function.
    durations: dict[str, list[float]] = {}
    memories: dict[str, list[float]] = {}
    edge_sync: dict[tuple[str, str], int] = {}
    edge_async: dict[tuple[str, str], int] = {}
    edge_latencies: dict[tuple[str, str], list[float]] = {}

    executions: dict[int, object] = {}
    for log in logs:
        for record in log.records:
            executions[record.execution_id] = record

    for log in logs:
        for record in log.records:
            for task, span in record.task_runs:
                durations.setdefault(task, []).append(span)
                memories.setdefault(task, []).append(float(record.memory_mb))
            for call in record.calls:
                key = (call.caller, call.callee)
                if call.mode is CallMode.SYNC:
                    edge_sync[key] = edge_sync.get(key, 0) + 1
                else:
                    edge_async[key] = edge_async.get(key, 0) + 1
                latency = _observed_latency(call, executions)
                if latency is not None:
                    edge_latencies.setdefault(key, []).append(latency)

    nodes = {
        task: TaskStats(
            task=task,
            invocation_count=len(spans),
            mean_duration_ms=sum(spans) / len(spans),
            mean_memory_mb=sum(memories[task]) / len(memories[task]),
        )
        for task, spans in sorted(durations.items())
    }
    edges = []
    for key in sorted(set(edge_sync) | set(edge_async)):
        sync_count = edge_sync.get(key, 0)
        async_count = edge_async.get(key, 0)
        latencies = edge_latencies.get(key, [])
        edges.append(
            CallEdge(
                caller=key[0],
                callee=key[1],
                mode=classify_edge(sync_count, async_count),
                count=sync_count + async_count,
                sync_count=sync_count,
                async_count=async_count,
                mean_callee_latency_ms=(sum(latencies) / len(latencies)) if latencies else 0.0,
            )
        )
    return CallGraph(nodes=nodes, edges=tuple(edges))


def _observed_latency(call, executions) -> float | None:
    if call.locality is Locality.LOCAL or call.completed_at_ms is not None:
        if call.completed_at_ms is None:
            return None
        return call.completed_at_ms - call.issued_at_ms
    # Remote async: join the spawned execution's response time, if present.
    child = executions.get(call.child_execution_id)
    if child is None:
        return None
    return child.end_ms - child.start_ms


def to_dot(graph: CallGraph) -> str:
    """Render the graph in Graphviz DOT: solid sync edges, dashed async."""
    lines = ["digraph calls {"]
    for task in sorted(graph.nodes):
        stats = graph.nodes[task]
        label = f"{task}\\n{stats.mean_duration_ms:.1f} ms (n={stats.invocation_count})"
        lines.append(f'  {task} [label="{label}"];')
    for edge in sorted(graph.edges, key=lambda e: (e.caller, e.callee)):
        style = "solid" if edge.mode is CallMode.SYNC else "dashed"
        lines.append(
            f'  {edge.caller} -> {edge.callee} [style={style}, label="{edge.mode.value} n={edge.count}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
