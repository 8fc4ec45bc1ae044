"""Tick propagation, halting, and per-runtime execution state.

One runtime belongs to one tree. Tick, halt, and reset must never run
concurrently for the same runtime; leaf behaviors may do their work
elsewhere but talk to the engine only through poll/preempt exchanges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blackboard import Blackboard
from .core import (
    ACTION,
    CONDITION,
    DECORATOR,
    FALLBACK,
    INVERTER,
    LOOP_BODY,
    PARALLEL,
    RETRY,
    SEQUENCE,
    ConditionReturnedRunning,
    MalformedTree,
    Status,
    TickTrace,
    TreeNode,
    UnknownNodeId,
    validate_structure,
)
from .registry import BehaviorRegistry, LeafContext


@dataclass
class _NodeState:
    running: bool = False
    memory_index: int = 0
    succeeded: set[int] = field(default_factory=set)
    attempts: int = 0

    def clear(self) -> None:
        self.running = False
        self.memory_index = 0
        self.succeeded.clear()
        self.attempts = 0


class TreeRuntime:
    """Mutable execution state for one tree: per-node bookkeeping plus tick count."""

    def __init__(self, tree: TreeNode):
        self.tree = tree
        self.index = validate_structure(tree)
        self.states: dict[str, _NodeState] = {nid: _NodeState() for nid in self.index}
        self.tick_count = 0
        self.preemption_log: list[str] = []
        self._checked_registry: BehaviorRegistry | None = None
        self._bound: tuple[Blackboard, BehaviorRegistry] | None = None

    def state(self, node_id: str) -> _NodeState:
        return self.states[node_id]

    def is_running(self, node_id: str) -> bool:
        return self.states[node_id].running

    def any_running(self) -> bool:
        return any(st.running for st in self.states.values())


def tick_root(
    tree: TreeNode,
    runtime: TreeRuntime,
    blackboard: Blackboard,
    registry: BehaviorRegistry,
) -> tuple[Status, TickTrace]:
    """Propagate one tick from the root; returns the root status and the visit trace."""
    if tree is not runtime.tree:
        raise MalformedTree("runtime was created for a different tree")
    if registry is not runtime._checked_registry:
        for node in tree.walk():
            if node.kind in (ACTION, CONDITION):
                registry.resolve(node)  # raises UnregisteredBehavior / kind mismatch
        runtime._checked_registry = registry
    runtime._bound = (blackboard, registry)
    runtime.tick_count += 1
    blackboard.begin_tick()
    trace = TickTrace(tick_index=runtime.tick_count)
    status = _tick(tree, runtime, blackboard, registry, trace)
    trace.keys_touched = blackboard.keys_touched()
    return status, trace


def halt(tree: TreeNode, runtime: TreeRuntime, node_id: str) -> None:
    """Idle the subtree rooted at node_id, preempting every Running action exactly once."""
    if tree is not runtime.tree:
        raise MalformedTree("runtime was created for a different tree")
    node = runtime.index.get(node_id)
    if node is None:
        raise UnknownNodeId(f"no node {node_id!r} in tree")
    _halt_subtree(node, runtime)


def reset(runtime: TreeRuntime) -> None:
    """Return the whole runtime to Idle (tick_count is preserved)."""
    _halt_subtree(runtime.tree, runtime)


def _halt_subtree(node: TreeNode, runtime: TreeRuntime) -> None:
    for sub in node.walk():
        st = runtime.states[sub.node_id]
        if sub.kind == ACTION and st.running:
            blackboard, registry = runtime._bound  # set by the tick that started it
            handler = registry.resolve(sub)
            handler.preempt(_ctx(sub, blackboard))
            runtime.preemption_log.append(sub.node_id)
        st.clear()


def _ctx(node: TreeNode, blackboard: Blackboard) -> LeafContext:
    return LeafContext(node.node_id, node.display_label, node.ports, blackboard)


def _tick(
    node: TreeNode,
    runtime: TreeRuntime,
    blackboard: Blackboard,
    registry: BehaviorRegistry,
    trace: TickTrace,
) -> Status:
    slot = len(trace.entries)
    trace.entries.append((node.node_id, Status.RUNNING))
    kind = node.kind
    if kind == ACTION:
        status = _tick_action(node, runtime, blackboard, registry)
    elif kind == CONDITION:
        status = _tick_condition(node, blackboard, registry)
    elif kind in (SEQUENCE, FALLBACK):
        if node.memory:
            status = _tick_memory_chain(node, runtime, blackboard, registry, trace)
        else:
            status = _tick_reactive_chain(node, runtime, blackboard, registry, trace)
    elif kind == PARALLEL:
        status = _tick_parallel(node, runtime, blackboard, registry, trace)
    elif kind == DECORATOR:
        status = _tick_decorator(node, runtime, blackboard, registry, trace)
    else:  # pragma: no cover - structure was validated at runtime creation
        raise MalformedTree(f"unknown node kind {kind!r}")

    trace.entries[slot] = (node.node_id, status)
    st = runtime.states[node.node_id]
    if status is Status.RUNNING:
        st.running = True
    else:
        # completion returns the node to Idle and clears its bookkeeping
        st.clear()
    return status


def _tick_action(node, runtime, blackboard, registry) -> Status:
    handler = registry.resolve(node)
    ctx = _ctx(node, blackboard)
    if not runtime.states[node.node_id].running:
        handler.start(ctx)
    status = handler.poll(ctx)
    if not isinstance(status, Status):
        raise MalformedTree(f"action {node.behavior!r} returned {status!r} instead of a Status")
    return status


def _tick_condition(node, blackboard, registry) -> Status:
    handler = registry.resolve(node)
    status = handler.check(_ctx(node, blackboard))
    if status is Status.RUNNING:
        raise ConditionReturnedRunning(
            f"condition {node.behavior!r} (node {node.node_id!r}) returned Running"
        )
    if not isinstance(status, Status):
        raise MalformedTree(f"condition {node.behavior!r} returned {status!r} instead of a Status")
    return status


def _tick_reactive_chain(node, runtime, blackboard, registry, trace) -> Status:
    # Sequence continues past Success, Fallback past Failure; the first other
    # status decides, and Running children to the right are halted.
    pass_status = Status.SUCCESS if node.kind == SEQUENCE else Status.FAILURE
    for i, child in enumerate(node.children):
        status = _tick(child, runtime, blackboard, registry, trace)
        if status is not pass_status:
            for later in node.children[i + 1 :]:
                _halt_subtree(later, runtime)
            return status
    return pass_status


def _tick_memory_chain(node, runtime, blackboard, registry, trace) -> Status:
    pass_status = Status.SUCCESS if node.kind == SEQUENCE else Status.FAILURE
    st = runtime.states[node.node_id]
    i = st.memory_index
    while i < len(node.children):
        status = _tick(node.children[i], runtime, blackboard, registry, trace)
        if status is pass_status:
            i += 1
            continue
        if status is Status.RUNNING:
            st.memory_index = i
        return status
    return pass_status


def _tick_parallel(node, runtime, blackboard, registry, trace) -> Status:
    threshold = (
        len(node.children) if node.success_threshold == "all" else int(node.success_threshold)
    )
    st = runtime.states[node.node_id]
    for i, child in enumerate(node.children):
        if i in st.succeeded:
            continue
        status = _tick(child, runtime, blackboard, registry, trace)
        if status is Status.FAILURE:
            _halt_siblings(node, runtime, skip=i)
            return Status.FAILURE
        if status is Status.SUCCESS:
            st.succeeded.add(i)
            if len(st.succeeded) >= threshold:
                _halt_siblings(node, runtime, skip=i)
                return Status.SUCCESS
    return Status.RUNNING


def _halt_siblings(node, runtime, skip: int) -> None:
    for j, child in enumerate(node.children):
        if j != skip:
            _halt_subtree(child, runtime)


def _tick_decorator(node, runtime, blackboard, registry, trace) -> Status:
    child = node.children[0]
    status = _tick(child, runtime, blackboard, registry, trace)
    if node.decorator == INVERTER:
        if status is Status.SUCCESS:
            return Status.FAILURE
        if status is Status.FAILURE:
            return Status.SUCCESS
        return Status.RUNNING
    if node.decorator == LOOP_BODY:
        # a completed pass reports Running so the enclosing goal condition is
        # re-evaluated next tick instead of the subtree terminating
        if status is Status.SUCCESS:
            _halt_subtree(child, runtime)
            return Status.RUNNING
        return status
    if node.decorator == RETRY:
        if status is not Status.FAILURE:
            return status
        st = runtime.states[node.node_id]
        st.attempts += 1
        if st.attempts >= node.max_attempts:
            return Status.FAILURE
        return Status.RUNNING
    raise MalformedTree(f"unknown decorator {node.decorator!r}")  # pragma: no cover
