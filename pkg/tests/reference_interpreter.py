"""Independent step interpreter used as the oracle for the tick engine.

Written directly from the node-semantics contract, before and separately from
the engine: plain recursion over the tree with all state in flat dicts, and
statuses as one-letter strings. The only thing shared with the engine is the
immutable TreeNode structure and the scripted-leaf contract below.

Scripted-leaf contract (mirrored by the engine-side handlers in conftest):

* Action leaf: holds a list of statuses. When ticked while not active its
  cursor resets to 0 (start). Each tick consumes one entry (clamping at the
  last) and the leaf is active afterwards iff the entry was "R". A halt
  deactivates the leaf; the next tick starts it again from entry 0.
* Condition leaf: same consume-with-clamp, but the cursor is persistent:
  it never resets, because conditions are never started or preempted.
"""

from __future__ import annotations

from chargerig.bt.core import TreeNode

S, F, R = "S", "F", "R"


class ReferenceInterpreter:
    def __init__(self, tree: TreeNode, scripts: dict[str, list[str]]):
        self.tree = tree
        self.scripts = scripts
        self.cursor: dict[str, int] = {}
        self.active: set[str] = set()
        self.mem: dict[str, int] = {}
        self.succ: dict[str, set[int]] = {}
        self.att: dict[str, int] = {}

    def tick(self) -> tuple[str, list[tuple[str, str]]]:
        trace: list[tuple[str, str]] = []
        status = self._visit(self.tree, trace)
        return status, trace

    # -- node dispatch --------------------------------------------------

    def _visit(self, node: TreeNode, trace: list[tuple[str, str]]) -> str:
        slot = len(trace)
        trace.append((node.node_id, "?"))
        if node.kind == "Action":
            status = self._leaf_action(node)
        elif node.kind == "Condition":
            status = self._leaf_condition(node)
        elif node.kind == "Sequence":
            status = self._memory_chain(node, trace) if node.memory else self._chain(node, trace, stop=S)
        elif node.kind == "Fallback":
            status = self._memory_chain(node, trace) if node.memory else self._chain(node, trace, stop=F)
        elif node.kind == "Parallel":
            status = self._parallel(node, trace)
        elif node.kind == "Decorator":
            status = self._decorator(node, trace)
        else:
            raise ValueError(node.kind)
        trace[slot] = (node.node_id, status)
        if status == R:
            self.active.add(node.node_id)
        else:
            self.active.discard(node.node_id)
            self.mem.pop(node.node_id, None)
            self.succ.pop(node.node_id, None)
            self.att.pop(node.node_id, None)
        return status

    def _chain(self, node: TreeNode, trace, stop: str) -> str:
        # reactive Sequence (stop="S": continue past Success) / Fallback (stop="F")
        for i, child in enumerate(node.children):
            status = self._visit(child, trace)
            if status != stop:
                for later in node.children[i + 1 :]:
                    self._quiet(later)
                return status
        return stop

    def _memory_chain(self, node: TreeNode, trace) -> str:
        cont = S if node.kind == "Sequence" else F
        i = self.mem.get(node.node_id, 0)
        while i < len(node.children):
            status = self._visit(node.children[i], trace)
            if status == cont:
                i += 1
                continue
            if status == R:
                self.mem[node.node_id] = i
                return R
            return status
        return cont

    def _parallel(self, node: TreeNode, trace) -> str:
        threshold = len(node.children) if node.success_threshold == "all" else node.success_threshold
        done = self.succ.setdefault(node.node_id, set())
        for i, child in enumerate(node.children):
            if i in done:
                continue
            status = self._visit(child, trace)
            if status == F:
                self._quiet_others(node, skip=i)
                return F
            if status == S:
                done.add(i)
                if len(done) >= threshold:
                    self._quiet_others(node, skip=i)
                    return S
        return R

    def _decorator(self, node: TreeNode, trace) -> str:
        child = node.children[0]
        status = self._visit(child, trace)
        if node.decorator == "Inverter":
            return {S: F, F: S, R: R}[status]
        if node.decorator == "LoopBody":
            if status == S:
                self._quiet(child)
                return R
            return status
        if node.decorator == "RetryUntilSuccessful":
            if status != F:
                return status
            n = self.att.get(node.node_id, 0) + 1
            if n >= node.max_attempts:
                return F
            self.att[node.node_id] = n
            return R
        raise ValueError(node.decorator)

    # -- leaves and halting ----------------------------------------------

    def _leaf_action(self, node: TreeNode) -> str:
        if node.node_id not in self.active:
            self.cursor[node.node_id] = 0
        return self._consume(node)

    def _leaf_condition(self, node: TreeNode) -> str:
        return self._consume(node)

    def _consume(self, node: TreeNode) -> str:
        script = self.scripts[node.node_id]
        i = self.cursor.get(node.node_id, 0)
        status = script[min(i, len(script) - 1)]
        self.cursor[node.node_id] = i + 1
        return status

    def _quiet(self, node: TreeNode) -> None:
        # halt: everything idle, bookkeeping gone
        for sub in node.walk():
            self.active.discard(sub.node_id)
            self.mem.pop(sub.node_id, None)
            self.succ.pop(sub.node_id, None)
            self.att.pop(sub.node_id, None)

    def _quiet_others(self, node: TreeNode, skip: int) -> None:
        for j, child in enumerate(node.children):
            if j != skip:
                self._quiet(child)
