"""Application specifications and request-arrival generators.

An :class:`ApplicationSpec` is a declarative task graph: per-task compute
cost, memory, external-service calls, and outgoing calls with a sync/async
mode. Two benchmark applications are built in:

* ``tree`` -- seven tasks A..G in a binary tree. The A-B-D-E side is called
  synchronously, the C-F-G side asynchronously, so the sync-connected
  component is exactly {A, B, D, E}.
* ``iot`` -- ten tasks modelling sensor ingestion (entry ``I``) fanning out
  to analysis tasks and database writers.

App specs can also be loaded from TOML files; see ``load_app_spec`` for the
schema.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import AppSpecError
from .model import CallMode, validate_task_name
from .sampling import Constant, Duration, duration_from_config

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class CallSpec:
    """One outgoing call: target task, mode, and firing probability."""

    target: str
    mode: CallMode
    probability: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.probability <= 1.0:
            raise AppSpecError(
                f"call to {self.target!r}: probability must be in (0, 1], got {self.probability}"
            )


@dataclass(frozen=True)
class ExternalCall:
    """Calls to an external service (e.g. a database) made while a task runs."""

    latency_ms: float
    count: int = 1

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise AppSpecError(f"external call latency must be >= 0, got {self.latency_ms}")
        if self.count < 0:
            raise AppSpecError(f"external call count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class TaskSpec:
    """Behavior of one task: compute, memory, external calls, outgoing calls."""

    id: str
    compute_ms: Duration
    memory_mb: int = 64
    external_calls: tuple[ExternalCall, ...] = ()
    calls: tuple[CallSpec, ...] = ()

    def __post_init__(self) -> None:
        validate_task_name(self.id)
        if isinstance(self.compute_ms, Constant) and self.compute_ms.ms <= 0:
            raise AppSpecError(f"task {self.id}: compute_ms must be strictly positive")
        if self.memory_mb < 1:
            raise AppSpecError(f"task {self.id}: memory_mb must be >= 1, got {self.memory_mb}")


@dataclass(frozen=True)
class ApplicationSpec:
    """A named, acyclic task graph with a single entry task."""

    name: str
    tasks: tuple[TaskSpec, ...]
    entry: str

    def __post_init__(self) -> None:
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise AppSpecError(f"duplicate task id(s): {', '.join(dupes)}")
        by_id = {t.id: t for t in self.tasks}
        if self.entry not in by_id:
            raise AppSpecError(f"entry task {self.entry!r} is not declared")
        for task in self.tasks:
            for call in task.calls:
                if call.target not in by_id:
                    raise AppSpecError(
                        f"task {task.id} calls undeclared task {call.target!r}"
                    )
        _check_acyclic(by_id)
        unreachable = set(by_id) - _reachable(by_id, self.entry)
        if unreachable:
            raise AppSpecError(
                f"task(s) unreachable from entry {self.entry!r}: {', '.join(sorted(unreachable))}"
            )

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise AppSpecError(f"unknown task {task_id!r} in application {self.name!r}")

    @property
    def task_ids(self) -> frozenset[str]:
        return frozenset(t.id for t in self.tasks)


def _check_acyclic(by_id: dict[str, TaskSpec]) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {tid: WHITE for tid in by_id}

    def visit(tid: str, path: list[str]) -> None:
        color[tid] = GREY
        path.append(tid)
        for call in by_id[tid].calls:
            if color[call.target] == GREY:
                start = path.index(call.target)
                cycle = path[start:] + [call.target]
                raise AppSpecError("cyclic calls: " + " -> ".join(cycle))
            if color[call.target] == WHITE:
                visit(call.target, path)
        path.pop()
        color[tid] = BLACK

    for tid in sorted(by_id):
        if color[tid] == WHITE:
            visit(tid, [])


def _reachable(by_id: dict[str, TaskSpec], entry: str) -> set[str]:
    seen: set[str] = set()
    stack = [entry]
    while stack:
        tid = stack.pop()
        if tid in seen:
            continue
        seen.add(tid)
        stack.extend(c.target for c in by_id[tid].calls)
    return seen


# ---------------------------------------------------------------------------
# Built-in benchmark applications
# ---------------------------------------------------------------------------

# Tree app compute times. The heavy/light split between the async and sync
# sides is mild on purpose: the billed-duration win of fusing the sync chain
# must dominate the (unfused) async branches, which scale with 3x the async
# compute in every setup.
_TREE_SYNC_MS = 400.0
_TREE_ASYNC_MS = 100.0

_IOT_ASYNC_MS = 500.0  # async-called analysis tasks crunch numbers
_IOT_SYNC_MS = 20.0  # sync-called tasks are quick
_IOT_DB_MS = 20.0  # one database round trip


def _tree_app() -> ApplicationSpec:
    sync = Constant(_TREE_SYNC_MS)
    heavy = Constant(_TREE_ASYNC_MS)

    def task(tid, compute, calls=()):
        return TaskSpec(id=tid, compute_ms=compute, memory_mb=64, calls=tuple(calls))

    return ApplicationSpec(
        name="tree",
        entry="A",
        tasks=(
            task("A", sync, [CallSpec("B", CallMode.SYNC), CallSpec("C", CallMode.ASYNC)]),
            task("B", sync, [CallSpec("D", CallMode.SYNC), CallSpec("E", CallMode.SYNC)]),
            task("C", heavy, [CallSpec("F", CallMode.ASYNC), CallSpec("G", CallMode.ASYNC)]),
            task("D", sync),
            task("E", sync),
            task("F", heavy),
            task("G", heavy),
        ),
    )


def _iot_app() -> ApplicationSpec:
    light = Constant(_IOT_SYNC_MS)
    heavy = Constant(_IOT_ASYNC_MS)
    db = ExternalCall(latency_ms=_IOT_DB_MS, count=1)

    def task(tid, compute, calls=(), external=()):
        return TaskSpec(
            id=tid,
            compute_ms=compute,
            memory_mb=64,
            external_calls=tuple(external),
            calls=tuple(calls),
        )

    return ApplicationSpec(
        name="iot",
        entry="I",
        tasks=(
            task(
                "I",
                light,
                [
                    CallSpec("CW", CallMode.SYNC),
                    CallSpec("SE", CallMode.SYNC),
                    CallSpec("CA", CallMode.ASYNC),
                    CallSpec("CT", CallMode.ASYNC),
                    CallSpec("CS", CallMode.ASYNC),
                ],
            ),
            task("CW", light),
            task("SE", light, external=[db]),
            task("CA", heavy, [CallSpec("DJ", CallMode.SYNC), CallSpec("AS", CallMode.ASYNC)]),
            task("DJ", light, external=[db]),
            task("CT", heavy, [CallSpec("AS", CallMode.ASYNC)]),
            task("AS", heavy, external=[db]),
            task("CS", heavy, [CallSpec("CSA", CallMode.SYNC)]),
            task("CSA", light, [CallSpec("CSL", CallMode.SYNC)], external=[db]),
            task("CSL", light, external=[ExternalCall(latency_ms=_IOT_DB_MS, count=3)]),
        ),
    )


_BUILTIN_APPS = {"tree": _tree_app, "iot": _iot_app}


def builtin_app(name: str) -> ApplicationSpec:
    """Return one of the built-in benchmark applications (``tree`` or ``iot``)."""
    try:
        factory = _BUILTIN_APPS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTIN_APPS))
        raise AppSpecError(f"unknown application {name!r} (built-ins: {known})") from None
    return factory()


# ---------------------------------------------------------------------------
# TOML app-spec files
# ---------------------------------------------------------------------------

def load_app_spec(path: Union[str, Path]) -> ApplicationSpec:
    """Load an application spec from a TOML file.

    Schema::

        name = "myapp"
        entry = "A"

        [task.A]
        compute_ms = 50                      # or {lognormal = [mu, sigma]}
        memory_mb = 64
        external_calls = [{latency_ms = 20, count = 1}]
        calls = [{target = "B", mode = "sync", probability = 1.0}]

    Parse errors cite the line number; validation errors name the offending
    task or call target.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise AppSpecError(f"{path}: TOML parse error: {exc}") from exc

    try:
        name = data["name"]
        entry = data["entry"]
        raw_tasks = data["task"]
    except KeyError as exc:
        raise AppSpecError(f"{path}: missing top-level key {exc.args[0]!r}") from None
    if not isinstance(raw_tasks, dict) or not raw_tasks:
        raise AppSpecError(f"{path}: expected at least one [task.<ID>] section")

    tasks = []
    for tid, body in raw_tasks.items():
        try:
            compute = duration_from_config(body["compute_ms"])
        except KeyError:
            raise AppSpecError(f"{path}: task {tid}: missing compute_ms") from None
        except ValueError as exc:
            raise AppSpecError(f"{path}: task {tid}: {exc}") from exc
        externals = tuple(
            ExternalCall(latency_ms=float(e["latency_ms"]), count=int(e.get("count", 1)))
            for e in body.get("external_calls", [])
        )
        calls = []
        for c in body.get("calls", []):
            try:
                mode = CallMode(c["mode"])
            except ValueError:
                raise AppSpecError(
                    f"{path}: task {tid}: call mode must be 'sync' or 'async', got {c['mode']!r}"
                ) from None
            except KeyError:
                raise AppSpecError(f"{path}: task {tid}: call is missing 'mode'") from None
            calls.append(
                CallSpec(target=c["target"], mode=mode, probability=float(c.get("probability", 1.0)))
            )
        tasks.append(
            TaskSpec(
                id=tid,
                compute_ms=compute,
                memory_mb=int(body.get("memory_mb", 64)),
                external_calls=externals,
                calls=tuple(calls),
            )
        )
    return ApplicationSpec(name=name, tasks=tuple(tasks), entry=entry)


# ---------------------------------------------------------------------------
# Workloads
# ---------------------------------------------------------------------------

class SimWorkloadError(AppSpecError):
    """Invalid workload parameters."""


@dataclass(frozen=True)
class SteadyRate:
    """Fixed-interval arrivals: ``total_requests`` requests at ``rate_rps``."""

    rate_rps: float
    total_requests: int

    def __post_init__(self) -> None:
        if self.rate_rps <= 0:
            raise SimWorkloadError(f"rate_rps must be > 0, got {self.rate_rps}")
        if self.total_requests < 1:
            raise SimWorkloadError(f"total_requests must be >= 1, got {self.total_requests}")

    def label(self) -> str:
        return f"steady:{self.rate_rps:g},{self.total_requests}"


@dataclass(frozen=True)
class ColdStorm:
    """Arrivals that each reset all instances first, forcing every function cold."""

    total_requests: int

    def __post_init__(self) -> None:
        if self.total_requests < 1:
            raise SimWorkloadError(f"total_requests must be >= 1, got {self.total_requests}")

    def label(self) -> str:
        return f"coldstorm:{self.total_requests}"


WorkloadKind = Union[SteadyRate, ColdStorm]


@dataclass(frozen=True)
class Workload:
    """A workload kind plus the seed driving all randomness of a run."""

    kind: WorkloadKind
    seed: int = 42

    def label(self) -> str:
        return f"{self.kind.label()}#seed={self.seed}"


@dataclass(frozen=True)
class ArrivalEvent:
    """One external request: arrival time, id, and whether it forces cold starts."""

    time_ms: float
    request_id: int
    force_cold: bool = False


# Cold-storm arrivals are spaced like a 1 rps steady load; since every arrival
# resets all instances, the spacing only affects timestamps, not behavior.
_COLD_STORM_SPACING_MS = 1000.0


def generate_arrivals(workload: Workload) -> list[ArrivalEvent]:
    """Materialize a workload into a deterministic arrival list."""
    kind = workload.kind
    if isinstance(kind, SteadyRate):
        interval = 1000.0 / kind.rate_rps
        return [
            ArrivalEvent(time_ms=i * interval, request_id=i)
            for i in range(kind.total_requests)
        ]
    if isinstance(kind, ColdStorm):
        return [
            ArrivalEvent(time_ms=i * _COLD_STORM_SPACING_MS, request_id=i, force_cold=True)
            for i in range(kind.total_requests)
        ]
    raise SimWorkloadError(f"unknown workload kind {kind!r}")
