"""Trace persistence and per-setup metric computation.

A :class:`TraceLog` plays the Log Storage role: an append-only sequence of
execution records for one application under one fusion setup. It serializes
to line-delimited JSON -- a header object followed by one object per
execution record -- and summarizes into request-response latency and billing
metrics.

Percentiles use the nearest-rank method (no interpolation): the p-th
percentile of n sorted values is the value at 1-indexed position
``ceil(p/100 * n)``. For two values [100, 200] the median is therefore 100.
Invocation ids are unique within one log; multi-log helpers aggregate
invocations per log, so traces from separate windows never collide.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import TraceError, TraceSchemaError
from .model import parse_setup
from .records import ExecutionRecord, record_from_dict, record_to_dict

logger = logging.getLogger(__name__)

SCHEMA_NAME = "fusionsim-trace"
SCHEMA_VERSION = 1


@dataclass
class TraceLog:
    """Append-only store of execution records for one (app, setup) pair."""

    setup_label: str
    app_name: str
    workload_label: str = ""
    records: list[ExecutionRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._function_ids = (
            {str(g) for g in parse_setup(self.setup_label).groups} if self.setup_label else set()
        )

    def append(self, record: ExecutionRecord) -> None:
        """Append one record; rejects records from a different setup."""
        if self._function_ids and record.function_id not in self._function_ids:
            raise TraceError(
                f"record function {record.function_id!r} does not belong to setup "
                f"{self.setup_label!r}"
            )
        self.records.append(record)

    def extend(self, other: "TraceLog") -> None:
        """Concatenate another log from the same application and setup."""
        if other.setup_label != self.setup_label or other.app_name != self.app_name:
            raise TraceError(
                f"cannot extend log for ({self.app_name!r}, {self.setup_label!r}) with "
                f"({other.app_name!r}, {other.setup_label!r})"
            )
        for record in other.records:
            self.append(record)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class MetricsSummary:
    """Latency/cost metrics of one setup, over successful root invocations."""

    setup: str
    n_invocations: int
    rr_med: float
    rr_avg: float
    rr_p99: float
    billed_avg: float
    billed_med: float
    cost_avg: float
    cold_start_count: int
    failed_count: int

    def to_dict(self) -> dict:
        return {
            "setup": self.setup,
            "n_invocations": self.n_invocations,
            "rr_med": self.rr_med,
            "rr_avg": self.rr_avg,
            "rr_p99": self.rr_p99,
            "billed_avg": self.billed_avg,
            "billed_med": self.billed_med,
            "cost_avg": self.cost_avg,
            "cold_start_count": self.cold_start_count,
            "failed_count": self.failed_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsSummary":
        return cls(**data)


def nearest_rank(values: Iterable[float], percentile: float) -> float:
    """Nearest-rank percentile: smallest value whose empirical CDF >= p/100."""
    array = np.asarray(sorted(values), dtype=float)
    if array.size == 0:
        raise TraceError("percentile of empty value list")
    return float(np.percentile(array, percentile, method="inverted_cdf"))


@dataclass
class _InvocationValues:
    rr: list[float]
    billed: list[float]
    costs: list[float]
    failed_count: int
    cold_start_count: int


def _collect(logs: Sequence[TraceLog], platform: Optional[object]) -> _InvocationValues:
    out = _InvocationValues(rr=[], billed=[], costs=[], failed_count=0, cold_start_count=0)
    if platform is not None:
        from .simkernel import billed_cost  # deferred to avoid a module cycle
    for log in logs:
        by_invocation: dict[int, list[ExecutionRecord]] = {}
        for record in log.records:
            by_invocation.setdefault(record.invocation_id, []).append(record)
            if record.cold_start:
                out.cold_start_count += 1
        for invocation_id in sorted(by_invocation):
            group = by_invocation[invocation_id]
            roots = [r for r in group if r.root]
            if len(roots) != 1:
                raise TraceError(
                    f"invocation {invocation_id} has {len(roots)} root executions, expected 1"
                )
            if any(r.failed for r in group):
                out.failed_count += 1
                continue
            root = roots[0]
            out.rr.append(root.end_ms - root.start_ms)
            out.billed.append(float(sum(r.billed_ms for r in group)))
            if platform is not None:
                out.costs.append(sum(billed_cost(r, platform) for r in group))
    return out


def summarize_logs(logs: Sequence[TraceLog], platform) -> MetricsSummary:
    """Metrics over several windows of the same setup (see :func:`summarize`)."""
    logs = list(logs)
    if not logs:
        raise TraceError("cannot summarize zero traces")
    labels = {(log.app_name, log.setup_label) for log in logs}
    if len(labels) != 1:
        raise TraceError(f"cannot summarize traces of mixed apps/setups: {sorted(labels)}")
    values = _collect(logs, platform)
    if not values.rr:
        raise TraceError(
            f"no successful root invocation in trace for setup {logs[0].setup_label!r}"
        )
    return MetricsSummary(
        setup=logs[0].setup_label,
        n_invocations=len(values.rr),
        rr_med=nearest_rank(values.rr, 50),
        rr_avg=float(np.mean(values.rr)),
        rr_p99=nearest_rank(values.rr, 99),
        billed_avg=float(np.mean(values.billed)),
        billed_med=nearest_rank(values.billed, 50),
        cost_avg=float(np.mean(values.costs)),
        cold_start_count=values.cold_start_count,
        failed_count=values.failed_count,
    )


def summarize(log: TraceLog, platform) -> MetricsSummary:
    """Compute the per-setup metrics summary from one trace.

    Request-response latency is root-function end minus arrival; billed
    duration per invocation sums every execution the request triggered.
    Failed root invocations are excluded from the statistics but counted.
    """
    return summarize_logs([log], platform)


def ecdf_points(
    logs: Union[TraceLog, Sequence[TraceLog]], metric: str
) -> list[tuple[float, float]]:
    """Empirical CDF of a per-invocation metric: (value_ms, cumulative fraction).

    ``metric`` is ``"rr"`` or ``"billed"``. One row per distinct value; the
    last fraction is exactly 1.0.
    """
    if metric not in ("rr", "billed"):
        raise TraceError(f"unknown ECDF metric {metric!r} (expected 'rr' or 'billed')")
    if isinstance(logs, TraceLog):
        logs = [logs]
    values = _collect(list(logs), None)
    data = values.rr if metric == "rr" else values.billed
    if not data:
        raise TraceError("cannot compute an ECDF from an empty trace")
    data = sorted(data)
    n = len(data)
    points: list[tuple[float, float]] = []
    for i, value in enumerate(data, start=1):
        if points and points[-1][0] == value:
            points[-1] = (value, i / n)
        else:
            points.append((value, i / n))
    return points


def ecdf_export(
    logs: Union[TraceLog, Sequence[TraceLog]], metric: str, path: Union[str, Path]
) -> None:
    """Write the ECDF as CSV with header ``value_ms,fraction``."""
    rows = ecdf_points(logs, metric)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("value_ms,fraction\n")
        for value, fraction in rows:
            fh.write(f"{value!r},{fraction!r}\n")


def save(log: TraceLog, path: Union[str, Path]) -> None:
    """Persist a trace as line-delimited JSON (header line, then records)."""
    path = Path(path)
    header = {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "app": log.app_name,
        "setup": log.setup_label,
        "workload": log.workload_label,
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        for record in log.records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")


def load(path: Union[str, Path]) -> TraceLog:
    """Load a trace saved by :func:`save`; the round trip is lossless."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or all(not line.strip() for line in lines):
        logger.warning("trace file %s is empty", path)
        return TraceLog(setup_label="", app_name="", workload_label="")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceSchemaError(f"{path}: line 1: not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema") != SCHEMA_NAME:
        raise TraceSchemaError(f"{path}: line 1: missing {SCHEMA_NAME!r} header")
    if header.get("version") != SCHEMA_VERSION:
        raise TraceSchemaError(
            f"{path}: schema version {header.get('version')!r} is not {SCHEMA_VERSION}"
        )
    log = TraceLog(
        setup_label=header.get("setup", ""),
        app_name=header.get("app", ""),
        workload_label=header.get("workload", ""),
    )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceSchemaError(f"{path}: line {lineno}: not valid JSON: {exc}") from exc
        try:
            log.append(record_from_dict(data))
        except TraceSchemaError as exc:
            raise TraceSchemaError(f"{path}: line {lineno}: {exc}") from exc
    return log
