"""Leaf behavior registry: decouples tree structure from implementations.

Action behaviors follow a start/poll/preempt contract so long-running work
can span many ticks; condition behaviors evaluate immediately and must never
report Running.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .blackboard import Blackboard, MissingKey
from .core import (
    ACTION,
    CONDITION,
    BehaviorKindMismatch,
    DuplicateName,
    Status,
    TreeNode,
    UnregisteredBehavior,
)


@dataclass
class LeafContext:
    """What a behavior sees when ticked: its node identity plus port access."""

    node_id: str
    label: str
    ports: Mapping[str, str]
    blackboard: Blackboard

    def key(self, port: str) -> str:
        try:
            return self.ports[port]
        except KeyError:
            raise MissingKey(f"node {self.node_id!r} has no port {port!r}") from None

    def read(self, port: str) -> Any:
        return self.blackboard.get(self.key(port))

    def write(self, port: str, value: Any) -> None:
        self.blackboard.set(self.key(port), value)

    def has(self, port: str) -> bool:
        return port in self.ports and self.blackboard.has(self.ports[port])


class ActionBehavior:
    """Base for leaf actions. Override poll; start/preempt as needed."""

    def start(self, ctx: LeafContext) -> None:
        pass

    def poll(self, ctx: LeafContext) -> Status:
        raise NotImplementedError

    def preempt(self, ctx: LeafContext) -> None:
        pass


class ConditionBehavior:
    """Base for leaf conditions: a single immediate check."""

    def check(self, ctx: LeafContext) -> Status:
        raise NotImplementedError


class FnCondition(ConditionBehavior):
    """Wraps a plain callable ctx -> bool or Status as a condition behavior."""

    def __init__(self, fn: Callable[[LeafContext], Any]):
        self.fn = fn

    def check(self, ctx: LeafContext) -> Status:
        result = self.fn(ctx)
        if isinstance(result, Status):
            return result
        return Status.SUCCESS if result else Status.FAILURE


class BehaviorRegistry:
    def __init__(self) -> None:
        self._handlers: dict[str, ActionBehavior | ConditionBehavior] = {}

    def register(self, name: str, handler: ActionBehavior | ConditionBehavior) -> None:
        if name in self._handlers:
            raise DuplicateName(f"behavior {name!r} is already registered")
        if not isinstance(handler, (ActionBehavior, ConditionBehavior)):
            raise BehaviorKindMismatch(
                f"handler for {name!r} must be an ActionBehavior or ConditionBehavior"
            )
        self._handlers[name] = handler

    def register_condition(self, name: str, fn: Callable[[LeafContext], Any]) -> None:
        self.register(name, FnCondition(fn))

    def kind_of(self, name: str) -> str | None:
        handler = self._handlers.get(name)
        if handler is None:
            return None
        return ACTION if isinstance(handler, ActionBehavior) else CONDITION

    def resolve(self, node: TreeNode) -> ActionBehavior | ConditionBehavior:
        handler = self._handlers.get(node.behavior)
        if handler is None:
            raise UnregisteredBehavior(
                f"behavior {node.behavior!r} (node {node.node_id!r}) is not registered"
            )
        if node.kind == ACTION and not isinstance(handler, ActionBehavior):
            raise BehaviorKindMismatch(
                f"node {node.node_id!r} is an Action but {node.behavior!r} is a condition"
            )
        if node.kind == CONDITION and not isinstance(handler, ConditionBehavior):
            raise BehaviorKindMismatch(
                f"node {node.node_id!r} is a Condition but {node.behavior!r} is an action"
            )
        return handler

    def names(self) -> list[str]:
        return sorted(self._handlers)


def register_behavior(
    registry: BehaviorRegistry, behavior_name: str, handler: ActionBehavior | ConditionBehavior
) -> None:
    registry.register(behavior_name, handler)
