"""Core domain types: tasks, fusion groups, fusion setups, and their notation.

A *task* is the developer-written unit of code; a *fusion group* is a set of
tasks co-deployed in one FaaS function; a *fusion setup* partitions all tasks
of an application into fusion groups. Setups are written ``(A,B)-(C)``: tasks
inside parentheses share a group, groups are separated by hyphens.

Everything here is an immutable value type in canonical form: task names
sorted within each group, groups sorted by their smallest member. The
canonical string doubles as the lookup key for setup histories.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

from .errors import MutationError, NotationError, PartitionError

_NAME_RE = re.compile(r"[A-Za-z0-9_]+")


class CallMode(Enum):
    """How one task calls another: blocking or fire-and-forget."""

    SYNC = "sync"
    ASYNC = "async"


def validate_task_name(name: str) -> str:
    """Check that a task name is a non-empty identifier over [A-Za-z0-9_]."""
    if not isinstance(name, str) or not _NAME_RE.fullmatch(name):
        raise NotationError(f"invalid task name {name!r} (expected [A-Za-z0-9_]+)")
    return name


@dataclass(frozen=True)
class FusionGroup:
    """A non-empty set of tasks deployed together in one function.

    ``tasks`` is kept as a sorted tuple so the group is hashable and already
    canonical.
    """

    tasks: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.tasks:
            raise PartitionError("fusion group must contain at least one task")
        for name in self.tasks:
            validate_task_name(name)
        if len(set(self.tasks)) != len(self.tasks):
            dupes = sorted({t for t in self.tasks if self.tasks.count(t) > 1})
            raise PartitionError(f"duplicate task(s) within group: {', '.join(dupes)}")
        if tuple(sorted(self.tasks)) != self.tasks:
            raise PartitionError(f"group tasks not in canonical order: {self.tasks}")

    @classmethod
    def of(cls, tasks: Iterable[str]) -> "FusionGroup":
        return cls(tuple(sorted(tasks)))

    def __contains__(self, task: str) -> bool:
        return task in self.tasks

    def __str__(self) -> str:
        return "(" + ",".join(self.tasks) + ")"


@dataclass(frozen=True)
class FusionSetup:
    """A partition of an application's task set into fusion groups."""

    groups: tuple[FusionGroup, ...]

    def __post_init__(self) -> None:
        if not self.groups:
            raise PartitionError("fusion setup must contain at least one group")
        seen: set[str] = set()
        for group in self.groups:
            for task in group.tasks:
                if task in seen:
                    raise PartitionError(f"duplicate task across groups: {task}")
                seen.add(task)
        ordered = tuple(sorted(self.groups, key=lambda g: g.tasks[0]))
        if ordered != self.groups:
            raise PartitionError("groups not in canonical order (sort by smallest member)")

    @classmethod
    def of(cls, groups: Iterable[Iterable[str]]) -> "FusionSetup":
        return cls(tuple(sorted((FusionGroup.of(g) for g in groups), key=lambda g: g.tasks[0])))

    @property
    def tasks(self) -> frozenset[str]:
        return frozenset(t for g in self.groups for t in g.tasks)

    @property
    def key(self) -> str:
        """Canonical string form; equal setups have equal keys."""
        return format_setup(self)

    def group_of(self, task: str) -> FusionGroup:
        for group in self.groups:
            if task in group:
                return group
        raise MutationError(f"unknown task {task!r} in setup {self.key}")

    def covers(self, tasks: Iterable[str]) -> bool:
        return self.tasks == frozenset(tasks)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class Merge:
    """Merge the group containing ``task_a`` with the group containing ``task_b``."""

    task_a: str
    task_b: str


@dataclass(frozen=True)
class SplitOut:
    """Move ``task`` out of its multi-task group into a new singleton group."""

    task: str


SetupMutation = Union[Merge, SplitOut]

_GROUP_RE = re.compile(r"\(([^()]*)\)")


def parse_setup(text: str) -> FusionSetup:
    """Parse ``(A,B)-(C)`` notation into a canonical :class:`FusionSetup`.

    Input group/task order is irrelevant; the result is always canonical.
    Raises :class:`NotationError` for syntax problems and
    :class:`PartitionError` for duplicate tasks.
    """
    stripped = text.strip()
    if not stripped:
        raise NotationError("empty setup string")
    pieces = []
    pos = 0
    while pos < len(stripped):
        match = _GROUP_RE.match(stripped, pos)
        if not match:
            raise NotationError(f"malformed setup near {stripped[pos:pos + 12]!r} in {text!r}")
        pieces.append(match.group(1))
        pos = match.end()
        if pos < len(stripped):
            if stripped[pos] != "-":
                raise NotationError(f"expected '-' between groups in {text!r}")
            pos += 1
            if pos == len(stripped):
                raise NotationError(f"trailing '-' in {text!r}")
    groups = []
    for piece in pieces:
        names = [name.strip() for name in piece.split(",")]
        if any(not name for name in names):
            raise NotationError(f"empty task name in group ({piece}) of {text!r}")
        for name in names:
            validate_task_name(name)
        if len(set(names)) != len(names):
            raise PartitionError(f"duplicate task within group ({piece})")
        groups.append(names)
    return FusionSetup.of(groups)


def format_setup(setup: FusionSetup) -> str:
    """Render a setup in canonical ``(A,B)-(C)`` notation."""
    return "-".join(str(group) for group in setup.groups)


def singleton_setup(tasks: Iterable[str]) -> FusionSetup:
    """One group per task: the natural initial deployment."""
    task_list = list(tasks)
    if not task_list:
        raise PartitionError("cannot build a setup from an empty task set")
    return FusionSetup.of([[t] for t in task_list])


def apply_mutation(setup: FusionSetup, mutation: SetupMutation) -> FusionSetup:
    """Apply a merge or split-out mutation, returning a new canonical setup."""
    if isinstance(mutation, Merge):
        group_a = setup.group_of(mutation.task_a)
        group_b = setup.group_of(mutation.task_b)
        if group_a == group_b:
            raise MutationError(
                f"cannot merge group {group_a} with itself "
                f"(tasks {mutation.task_a!r} and {mutation.task_b!r} already share it)"
            )
        rest = [g.tasks for g in setup.groups if g not in (group_a, group_b)]
        return FusionSetup.of(rest + [group_a.tasks + group_b.tasks])
    if isinstance(mutation, SplitOut):
        group = setup.group_of(mutation.task)
        if len(group.tasks) == 1:
            raise MutationError(f"task {mutation.task!r} is already alone in its group")
        rest = [g.tasks for g in setup.groups if g != group]
        remaining = tuple(t for t in group.tasks if t != mutation.task)
        return FusionSetup.of(rest + [remaining, (mutation.task,)])
    raise MutationError(f"unknown mutation {mutation!r}")
