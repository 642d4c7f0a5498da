"""Execution and call records: the monitoring-data contract.

These records are what the simulated platform "logs" and are the sole input
to metrics and call-graph inference. They serialize to line-delimited JSON
(see :mod:`fusionsim.trace`); field names and millisecond units are stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import TraceSchemaError
from .model import CallMode


class Locality(Enum):
    LOCAL = "local"
    REMOTE = "remote"


@dataclass
class CallRecord:
    """One observed task call, as the fusion handler would log it."""

    caller: str
    callee: str
    mode: CallMode
    locality: Locality
    issued_at_ms: float
    completed_at_ms: Optional[float] = None  # None => remote async (dispatched, not awaited)
    child_execution_id: Optional[int] = None  # set for remote calls


@dataclass
class ExecutionRecord:
    """One function execution: the unit of monitoring data and billing.

    ``start_ms`` is when the request reached the function; ``init_ms`` is
    cold-start initialization (0 when warm), visible in response time but not
    billed; ``task_runs`` holds (task, span_ms) for every task run locally in
    this execution, entry task included.
    """

    execution_id: int
    invocation_id: int
    function_id: str
    entry_task: str
    root: bool
    cold_start: bool
    failed: bool
    start_ms: float
    init_ms: float
    end_ms: float
    billed_ms: int
    memory_mb: int
    calls: list[CallRecord] = field(default_factory=list)
    task_runs: list[tuple[str, float]] = field(default_factory=list)

    @property
    def response_ms(self) -> float:
        return self.end_ms - self.start_ms


def call_to_dict(call: CallRecord) -> dict:
    return {
        "caller": call.caller,
        "callee": call.callee,
        "mode": call.mode.value,
        "locality": call.locality.value,
        "issued_at_ms": call.issued_at_ms,
        "completed_at_ms": call.completed_at_ms,
        "child_execution_id": call.child_execution_id,
    }


def call_from_dict(data: dict) -> CallRecord:
    return CallRecord(
        caller=data["caller"],
        callee=data["callee"],
        mode=CallMode(data["mode"]),
        locality=Locality(data["locality"]),
        issued_at_ms=data["issued_at_ms"],
        completed_at_ms=data["completed_at_ms"],
        child_execution_id=data["child_execution_id"],
    )


def record_to_dict(record: ExecutionRecord) -> dict:
    return {
        "execution_id": record.execution_id,
        "invocation_id": record.invocation_id,
        "function_id": record.function_id,
        "entry_task": record.entry_task,
        "root": record.root,
        "cold_start": record.cold_start,
        "failed": record.failed,
        "start_ms": record.start_ms,
        "init_ms": record.init_ms,
        "end_ms": record.end_ms,
        "billed_ms": record.billed_ms,
        "memory_mb": record.memory_mb,
        "calls": [call_to_dict(c) for c in record.calls],
        "task_runs": [[task, span] for task, span in record.task_runs],
    }


def record_from_dict(data: dict) -> ExecutionRecord:
    try:
        return ExecutionRecord(
            execution_id=data["execution_id"],
            invocation_id=data["invocation_id"],
            function_id=data["function_id"],
            entry_task=data["entry_task"],
            root=data["root"],
            cold_start=data["cold_start"],
            failed=data["failed"],
            start_ms=data["start_ms"],
            init_ms=data["init_ms"],
            end_ms=data["end_ms"],
            billed_ms=data["billed_ms"],
            memory_mb=data["memory_mb"],
            calls=[call_from_dict(c) for c in data["calls"]],
            task_runs=[(task, span) for task, span in data["task_runs"]],
        )
    except (KeyError, ValueError) as exc:
        raise TraceSchemaError(f"bad execution record: {exc!r}") from exc
