"""Behavior-tree data model: statuses, node structure, traces, errors.

The tree structure is immutable; all mutable execution state lives in
``TreeRuntime`` (see ``chargerig.bt.engine``) so one tree definition can back
any number of independent runtimes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping


class Status(enum.Enum):
    """Ternary result returned by every node tick."""

    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"

    def __repr__(self) -> str:  # keeps traces readable in test output
        return self.name


SEQUENCE = "Sequence"
FALLBACK = "Fallback"
PARALLEL = "Parallel"
DECORATOR = "Decorator"
ACTION = "Action"
CONDITION = "Condition"

COMPOSITE_KINDS = (SEQUENCE, FALLBACK, PARALLEL)
LEAF_KINDS = (ACTION, CONDITION)

INVERTER = "Inverter"
RETRY = "RetryUntilSuccessful"
LOOP_BODY = "LoopBody"

DECORATOR_KINDS = (INVERTER, RETRY, LOOP_BODY)


class BTError(Exception):
    """Base class for behavior-tree engine errors."""


class MalformedTree(BTError):
    pass


class UnknownNodeId(BTError):
    pass


class UnregisteredBehavior(BTError):
    pass


class BehaviorKindMismatch(BTError):
    pass


class ConditionReturnedRunning(BTError):
    pass


class DuplicateName(BTError):
    pass


@dataclass(frozen=True)
class TreeNode:
    """One node of an immutable behavior tree.

    ``kind`` selects which of the optional fields are meaningful:

    * Sequence/Fallback: ``memory``
    * Parallel: ``success_threshold`` (positive int, or ``"all"``)
    * Decorator: ``decorator`` plus ``max_attempts`` for retry
    * Action/Condition: ``behavior`` and ``ports`` (port name -> blackboard key)
    """

    kind: str
    node_id: str
    label: str = ""
    children: tuple["TreeNode", ...] = ()
    memory: bool = False
    success_threshold: int | str = "all"
    decorator: str = ""
    max_attempts: int = 1
    behavior: str = ""
    ports: Mapping[str, str] = field(default_factory=dict)

    def walk(self) -> Iterator["TreeNode"]:
        """Depth-first pre-order over the subtree rooted here."""
        yield self
        for child in self.children:
            yield from child.walk()

    @property
    def display_label(self) -> str:
        return self.label or self.behavior or self.node_id


def validate_structure(root: TreeNode) -> dict[str, TreeNode]:
    """Check structural invariants and return a node_id -> node index.

    Raises MalformedTree on duplicate ids, bad arity, or invalid parameters.
    """
    index: dict[str, TreeNode] = {}
    for node in root.walk():
        if node.node_id in index:
            raise MalformedTree(f"duplicate node_id {node.node_id!r}")
        index[node.node_id] = node
        n = len(node.children)
        if node.kind in LEAF_KINDS:
            if n != 0:
                raise MalformedTree(f"{node.kind} {node.node_id!r} must have no children")
            if not node.behavior:
                raise MalformedTree(f"{node.kind} {node.node_id!r} has no behavior name")
        elif node.kind == DECORATOR:
            if n != 1:
                raise MalformedTree(f"Decorator {node.node_id!r} must have exactly 1 child")
            if node.decorator not in DECORATOR_KINDS:
                raise MalformedTree(f"unknown decorator {node.decorator!r} at {node.node_id!r}")
            if node.decorator == RETRY and node.max_attempts < 1:
                raise MalformedTree(f"retry {node.node_id!r} needs max_attempts >= 1")
        elif node.kind in COMPOSITE_KINDS:
            if n < 1:
                raise MalformedTree(f"{node.kind} {node.node_id!r} must have children")
            if node.kind == PARALLEL:
                t = node.success_threshold
                if t != "all" and (not isinstance(t, int) or t < 1 or t > n):
                    raise MalformedTree(
                        f"Parallel {node.node_id!r} threshold {t!r} invalid for {n} children"
                    )
        else:
            raise MalformedTree(f"unknown node kind {node.kind!r} at {node.node_id!r}")
    return index


@dataclass
class TickTrace:
    """Visit record of one root tick: (node_id, returned status) in pre-order."""

    tick_index: int
    entries: list[tuple[str, Status]] = field(default_factory=list)
    keys_touched: list[str] = field(default_factory=list)

    def visited(self) -> list[str]:
        return [node_id for node_id, _ in self.entries]

    def status_of(self, node_id: str) -> Status | None:
        for nid, status in self.entries:
            if nid == node_id:
                return status
        return None

    def to_json(self) -> dict:
        return {
            "tick": self.tick_index,
            "entries": [[nid, status.value] for nid, status in self.entries],
            "keys": list(self.keys_touched),
        }


# -- construction helpers ----------------------------------------------------

_auto_counter = 0


def _next_id(prefix: str) -> str:
    global _auto_counter
    _auto_counter += 1
    return f"{prefix}_{_auto_counter}"


def sequence(children, *, memory=False, node_id=None, label=""):
    return TreeNode(SEQUENCE, node_id or _next_id("seq"), label, tuple(children), memory=memory)


def fallback(children, *, memory=False, node_id=None, label=""):
    return TreeNode(FALLBACK, node_id or _next_id("fb"), label, tuple(children), memory=memory)


def parallel(children, *, success_threshold="all", node_id=None, label=""):
    return TreeNode(
        PARALLEL,
        node_id or _next_id("par"),
        label,
        tuple(children),
        success_threshold=success_threshold,
    )


def inverter(child, *, node_id=None, label=""):
    return TreeNode(DECORATOR, node_id or _next_id("inv"), label, (child,), decorator=INVERTER)


def retry(child, max_attempts, *, node_id=None, label=""):
    return TreeNode(
        DECORATOR,
        node_id or _next_id("retry"),
        label,
        (child,),
        decorator=RETRY,
        max_attempts=max_attempts,
    )


def loop_body(child, *, node_id=None, label=""):
    return TreeNode(DECORATOR, node_id or _next_id("loop"), label, (child,), decorator=LOOP_BODY)


def action(behavior, *, ports=None, node_id=None, label=""):
    return TreeNode(
        ACTION, node_id or _next_id("act"), label, behavior=behavior, ports=dict(ports or {})
    )


def condition(behavior, *, ports=None, node_id=None, label=""):
    return TreeNode(
        CONDITION, node_id or _next_id("cond"), label, behavior=behavior, ports=dict(ports or {})
    )
