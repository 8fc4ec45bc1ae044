from .blackboard import (
    Blackboard,
    BlackboardTypeError,
    MissingKey,
    UndeclaredKey,
    blackboard_get,
    blackboard_set,
)
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
    BehaviorKindMismatch,
    BTError,
    ConditionReturnedRunning,
    DuplicateName,
    MalformedTree,
    Status,
    TickTrace,
    TreeNode,
    UnknownNodeId,
    UnregisteredBehavior,
    action,
    condition,
    fallback,
    inverter,
    loop_body,
    parallel,
    retry,
    sequence,
    validate_structure,
)
from .engine import TreeRuntime, halt, reset, tick_root
from .registry import (
    ActionBehavior,
    BehaviorRegistry,
    ConditionBehavior,
    FnCondition,
    LeafContext,
    register_behavior,
)

__all__ = [
    "ACTION",
    "CONDITION",
    "DECORATOR",
    "FALLBACK",
    "INVERTER",
    "LOOP_BODY",
    "PARALLEL",
    "RETRY",
    "SEQUENCE",
    "ActionBehavior",
    "BTError",
    "BehaviorKindMismatch",
    "BehaviorRegistry",
    "Blackboard",
    "BlackboardTypeError",
    "ConditionBehavior",
    "ConditionReturnedRunning",
    "DuplicateName",
    "FnCondition",
    "LeafContext",
    "MalformedTree",
    "MissingKey",
    "Status",
    "TickTrace",
    "TreeNode",
    "TreeRuntime",
    "UndeclaredKey",
    "UnknownNodeId",
    "UnregisteredBehavior",
    "action",
    "blackboard_get",
    "blackboard_set",
    "condition",
    "fallback",
    "halt",
    "inverter",
    "loop_body",
    "parallel",
    "register_behavior",
    "reset",
    "retry",
    "sequence",
    "tick_root",
    "validate_structure",
]
