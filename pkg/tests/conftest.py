import random
import sys
from collections import Counter
from itertools import count
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))  # reference_interpreter, helpers

from chargerig.bt import ActionBehavior, BehaviorRegistry, ConditionBehavior, Status, TreeNode

LETTER_TO_STATUS = {"S": Status.SUCCESS, "F": Status.FAILURE, "R": Status.RUNNING}
STATUS_TO_LETTER = {v: k for k, v in LETTER_TO_STATUS.items()}


class Scripts:
    """Cursor state for scripted leaves, keyed by node_id (handlers are shared)."""

    def __init__(self, scripts: dict[str, list[str]]):
        self.scripts = scripts
        self.cursor: dict[str, int] = {}
        self.preempts: Counter = Counter()

    def consume(self, node_id: str) -> Status:
        script = self.scripts[node_id]
        i = self.cursor.get(node_id, 0)
        self.cursor[node_id] = i + 1
        return LETTER_TO_STATUS[script[min(i, len(script) - 1)]]


class ScriptedAction(ActionBehavior):
    def __init__(self, scripts: Scripts):
        self.scripts = scripts

    def start(self, ctx):
        self.scripts.cursor[ctx.node_id] = 0

    def poll(self, ctx):
        return self.scripts.consume(ctx.node_id)

    def preempt(self, ctx):
        self.scripts.preempts[ctx.node_id] += 1


class ScriptedCondition(ConditionBehavior):
    def __init__(self, scripts: Scripts):
        self.scripts = scripts

    def check(self, ctx):
        return self.scripts.consume(ctx.node_id)


def scripted_registry(scripts: dict[str, list[str]]) -> tuple[BehaviorRegistry, Scripts]:
    state = Scripts(scripts)
    registry = BehaviorRegistry()
    registry.register("act", ScriptedAction(state))
    registry.register("cond", ScriptedCondition(state))
    return registry, state


def random_tree(rng: random.Random, max_depth: int = 5) -> tuple[TreeNode, dict[str, list[str]]]:
    """Random tree over all node kinds (memory variants and decorators included)."""
    scripts: dict[str, list[str]] = {}
    ids = count(1)

    def build(depth: int) -> TreeNode:
        nid = f"n{next(ids)}"
        if depth >= max_depth or rng.random() < 0.35:
            if rng.random() < 0.55:
                scripts[nid] = [rng.choice("SFR") for _ in range(rng.randint(1, 6))]
                return TreeNode("Action", nid, behavior="act")
            scripts[nid] = [rng.choice("SF") for _ in range(rng.randint(1, 4))]
            return TreeNode("Condition", nid, behavior="cond")
        kind = rng.choice(["Sequence", "Fallback", "Parallel", "Decorator"])
        if kind == "Decorator":
            deco = rng.choice(["Inverter", "RetryUntilSuccessful", "LoopBody"])
            return TreeNode(
                "Decorator",
                nid,
                children=(build(depth + 1),),
                decorator=deco,
                max_attempts=rng.randint(1, 3),
            )
        children = tuple(build(depth + 1) for _ in range(rng.randint(1, 4)))
        if kind == "Parallel":
            threshold = rng.choice(["all", rng.randint(1, len(children))])
            return TreeNode("Parallel", nid, children=children, success_threshold=threshold)
        return TreeNode(kind, nid, children=children, memory=rng.random() < 0.4)

    return build(0), scripts
