"""High-level finite state machine over the phase behavior trees.

The orchestrator owns the current phase, runs exactly one tree per phase,
maps tree results and operator commands onto the transition table, and turns
tree failures into operator assistance prompts. Recovery is resume-by-restart:
re-entering a phase reruns its tree from reset and the goal conditions skip
whatever already holds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

from .bt.blackboard import Blackboard
from .bt.core import ACTION, CONDITION, Status, TickTrace, TreeNode
from .bt.engine import TreeRuntime, reset, tick_root
from .bt.registry import BehaviorRegistry
from .dsl import TreeDocument
from .mission import ChargingMission, HoleState
from .sim import SimWorld


class Phase(enum.Enum):
    IDLE = "Idle"
    PRE_SCAN = "PreScan"
    DETECT_HOLES = "DetectHoles"
    CHARGE_PLAN = "ChargePlan"
    CHARGING = "Charging"
    MISSION_COMPLETE = "MissionComplete"


class Event(enum.Enum):
    START_MISSION = "StartMission"
    SCAN_COMPLETE = "ScanComplete"
    NEW_HOLES_DETECTED = "NewHolesDetected"
    START_CHARGING = "StartCharging"
    RE_PLAN = "RePlan"
    SCAN_AGAIN = "ScanAgain"
    CHARGING_COMPLETE = "ChargingComplete"
    ASSISTANCE_RESOLVED = "AssistanceResolved"


# operator-originated vs tree-result-originated events
OPERATOR_EVENTS = frozenset({Event.START_MISSION, Event.START_CHARGING, Event.RE_PLAN, Event.SCAN_AGAIN})
BT_RESULT_EVENTS = frozenset({Event.SCAN_COMPLETE, Event.NEW_HOLES_DETECTED, Event.CHARGING_COMPLETE})

TRANSITIONS: dict[tuple[Phase, Event], Phase] = {
    (Phase.IDLE, Event.START_MISSION): Phase.PRE_SCAN,
    (Phase.PRE_SCAN, Event.SCAN_COMPLETE): Phase.DETECT_HOLES,
    (Phase.DETECT_HOLES, Event.NEW_HOLES_DETECTED): Phase.CHARGE_PLAN,
    (Phase.CHARGE_PLAN, Event.START_CHARGING): Phase.CHARGING,
    (Phase.CHARGING, Event.RE_PLAN): Phase.CHARGE_PLAN,
    (Phase.CHARGE_PLAN, Event.SCAN_AGAIN): Phase.DETECT_HOLES,
    (Phase.CHARGING, Event.CHARGING_COMPLETE): Phase.MISSION_COMPLETE,
}

PHASE_TREES: dict[Phase, str] = {
    Phase.PRE_SCAN: "PreScan",
    Phase.DETECT_HOLES: "DetectHoles",
    Phase.CHARGE_PLAN: "ChargePlan",
    Phase.CHARGING: "Charging",
}

# tree Success in these phases advances the mission automatically; ChargePlan
# instead waits for the operator to approve or redirect
AUTO_EVENTS: dict[Phase, Event] = {
    Phase.PRE_SCAN: Event.SCAN_COMPLETE,
    Phase.DETECT_HOLES: Event.NEW_HOLES_DETECTED,
    Phase.CHARGING: Event.CHARGING_COMPLETE,
}


class Resolution(enum.Enum):
    RETRY = "Retry"
    SKIP_HOLE = "SkipHole"
    RE_PLAN = "RePlan"
    SCAN_AGAIN = "ScanAgain"
    TELEOP_NUDGE = "TeleopNudge"
    ABORT = "Abort"


class FsmError(Exception):
    pass


class RejectedEvent(FsmError):
    def __init__(self, phase: Phase, event: Event):
        super().__init__(f"event {event.value} is not valid in phase {phase.value}")
        self.phase = phase
        self.event = event


class NotRunning(FsmError):
    pass


class NotPaused(FsmError):
    pass


class NoActivePrompt(FsmError):
    pass


class InvalidResolutionForPhase(FsmError):
    pass


@dataclass
class AssistancePrompt:
    phase: Phase
    node_id: str
    label: str
    hole_id: str | None
    resolutions: list[Resolution]
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "phase": self.phase.value,
            "node_id": self.node_id,
            "label": self.label,
            "hole_id": self.hole_id,
            "resolutions": [r.value for r in self.resolutions],
            "detail": self.detail,
        }


def _offered_resolutions(phase: Phase, hole_id: str | None) -> list[Resolution]:
    if phase is Phase.CHARGING:
        out = [Resolution.RETRY]
        if hole_id is not None:
            out.append(Resolution.SKIP_HOLE)
        out.append(Resolution.RE_PLAN)
        if hole_id is not None:
            out.append(Resolution.TELEOP_NUDGE)
        out.append(Resolution.ABORT)
        return out
    if phase is Phase.CHARGE_PLAN:
        return [Resolution.RETRY, Resolution.SCAN_AGAIN, Resolution.ABORT]
    return [Resolution.RETRY, Resolution.ABORT]


@dataclass
class _PhaseTree:
    name: str
    tree: TreeNode
    runtime: TreeRuntime
    parents: dict[str, str | None]


class Orchestrator:
    """Single control loop owner: tick cadence, operator commands between
    ticks, and a one-way event outbox for observers."""

    def __init__(self, doc: TreeDocument, world: SimWorld, registry: BehaviorRegistry):
        self.doc = doc
        self.world = world
        self.registry = registry
        self.blackboard = Blackboard(declarations=doc.blackboard)
        self.phase = Phase.IDLE
        self.paused = False
        self.phase_result: Status | None = None
        self.prompt: AssistancePrompt | None = None
        self.outbox: list[dict] = []
        self._trees: dict[str, _PhaseTree] = {}
        for phase, name in PHASE_TREES.items():
            tree = doc.trees[name]
            parents: dict[str, str | None] = {tree.node_id: None}
            for node in tree.walk():
                for child in node.children:
                    parents[child.node_id] = node.node_id
            self._trees[name] = _PhaseTree(name, tree, TreeRuntime(tree), parents)

    # -- helpers -----------------------------------------------------------

    def _emit(self, kind: str, **payload: Any) -> None:
        self.outbox.append({"kind": kind, **payload})

    def drain_outbox(self) -> list[dict]:
        out, self.outbox = self.outbox, []
        return out

    def active_tree(self) -> _PhaseTree | None:
        name = PHASE_TREES.get(self.phase)
        return self._trees[name] if name else None

    def mission(self) -> ChargingMission | None:
        if self.blackboard.has("mission"):
            value = self.blackboard.get("mission")
            if isinstance(value, ChargingMission):
                return value
        return None

    def current_hole(self):
        if self.blackboard.has("current_hole"):
            return self.blackboard.get("current_hole")
        return None

    # -- transitions -------------------------------------------------------

    def handle_event(self, event: Event) -> Phase:
        """Apply one labeled transition; anything outside the table is rejected."""
        target = TRANSITIONS.get((self.phase, event))
        if target is None:
            raise RejectedEvent(self.phase, event)
        outgoing = self.active_tree()
        if outgoing is not None:
            reset(outgoing.runtime)
        if self.prompt is not None:
            # a transition away from a failed phase supersedes its prompt
            self._emit("AssistancePromptCleared", resolution=None)
            self.prompt = None
        previous, self.phase = self.phase, target
        self.phase_result = None
        incoming = self.active_tree()
        if incoming is not None:
            reset(incoming.runtime)
        self._emit("PhaseChanged", phase=target.value, previous=previous.value, cause=event.value)
        return target

    def on_bt_result(self, phase: Phase, status: Status, trace: TickTrace | None = None):
        """Map a finished phase tree onto the next event or an assistance prompt."""
        if status is Status.SUCCESS:
            event = AUTO_EVENTS.get(phase)
            if event is not None:
                self.handle_event(event)
            return event
        prompt = self._build_prompt(phase, trace)
        self.prompt = prompt
        mission = self.mission()
        if prompt.hole_id and mission is not None:
            hole = mission.holes.get(prompt.hole_id)
            if hole is not None and hole.state is HoleState.CHARGING:
                hole.advance(HoleState.FAILED)
        self._emit("AssistancePromptRaised", prompt=prompt.to_json())
        return prompt

    def _build_prompt(self, phase: Phase, trace: TickTrace | None) -> AssistancePrompt:
        tree = self.active_tree()
        node_id, label, hole_id = "", "", None
        if trace is not None and tree is not None:
            for nid, status in reversed(trace.entries):
                node = tree.runtime.index.get(nid)
                if status is Status.FAILURE and node is not None and node.kind in (ACTION, CONDITION):
                    node_id = nid
                    label = self._context_label(tree, nid)
                    hole_id = self._hole_binding(node)
                    break
        if hole_id is None and phase is Phase.CHARGING:
            current = self.current_hole()
            if current is not None:
                hole_id = current.id
        return AssistancePrompt(
            phase=phase,
            node_id=node_id,
            label=label,
            hole_id=hole_id,
            resolutions=_offered_resolutions(phase, hole_id),
            detail=self.world.last_failure or "",
        )

    def _context_label(self, tree: _PhaseTree, node_id: str) -> str:
        cursor: str | None = node_id
        while cursor is not None:
            node = tree.runtime.index[cursor]
            if node.label:
                return node.label
            cursor = tree.parents.get(cursor)
        return tree.runtime.index[node_id].display_label

    def _hole_binding(self, node: TreeNode) -> str | None:
        key = node.ports.get("hole")
        if key and self.blackboard.has(key):
            value = self.blackboard.get(key)
            if value is not None:
                return value.id
        return None

    # -- ticking -------------------------------------------------------------

    def tick(self) -> TickTrace | None:
        """One control-loop step: tick the active phase tree, if any."""
        if self.paused or self.prompt is not None or self.phase_result is not None:
            return None
        tree = self.active_tree()
        if tree is None:
            return None
        status, trace = tick_root(tree.tree, tree.runtime, self.blackboard, self.registry)
        if status is not Status.RUNNING:
            self.phase_result = status
            self.on_bt_result(self.phase, status, trace)
        return trace

    # -- pause / resume --------------------------------------------------------

    def pause(self) -> None:
        if self.paused:
            raise NotRunning("already paused")
        tree = self.active_tree()
        if tree is None:
            raise NotRunning(f"no active phase tree in {self.phase.value}")
        reset(tree.runtime)  # halts running actions via their preempt hooks
        self.paused = True
        self._emit("Paused")

    def resume(self) -> None:
        if not self.paused:
            raise NotPaused("not paused")
        self.paused = False
        tree = self.active_tree()
        if tree is not None and self.phase_result is None:
            reset(tree.runtime)  # restart from scratch; goal conditions skip done work
        self._emit("Resumed")

    def halt_all(self) -> None:
        """Emergency stop support: idle every tree immediately."""
        for tree in self._trees.values():
            reset(tree.runtime)

    # -- assistance --------------------------------------------------------------

    def resolve_assistance(self, resolution: Resolution, args: dict | None = None) -> Event | None:
        if self.prompt is None:
            raise NoActivePrompt("no assistance prompt is active")
        if resolution not in self.prompt.resolutions:
            raise InvalidResolutionForPhase(
                f"{resolution.value} is not offered for {self.prompt.phase.value}"
            )
        args = args or {}
        prompt, self.prompt = self.prompt, None
        emitted: Event | None = None

        if resolution is Resolution.ABORT:
            tree = self.active_tree()
            if tree is not None:
                reset(tree.runtime)
            previous, self.phase = self.phase, Phase.IDLE
            self.phase_result = None
            self._emit("PhaseChanged", phase=self.phase.value, previous=previous.value, cause="Abort")
        elif resolution is Resolution.RE_PLAN:
            emitted = Event.RE_PLAN
            self.handle_event(emitted)
        elif resolution is Resolution.SCAN_AGAIN:
            emitted = Event.SCAN_AGAIN
            self.handle_event(emitted)
        else:
            if resolution is Resolution.TELEOP_NUDGE:
                hole_id = args.get("hole_id") or prompt.hole_id
                if hole_id is None:
                    raise InvalidResolutionForPhase("TeleopNudge needs a hole")
                self.world.nudge_estimate(hole_id, args.get("dx", 0.0), args.get("dy", 0.0))
            if resolution is Resolution.SKIP_HOLE:
                self._mark_prompt_hole(prompt, HoleState.SKIPPED)
            else:  # Retry and TeleopNudge re-enter the charging cycle
                self._mark_prompt_hole(prompt, HoleState.CHARGING)
            self._restart_phase()
        self._emit(
            "AssistancePromptCleared",
            resolution=resolution.value,
            event=emitted.value if emitted else None,
        )
        return emitted

    def _mark_prompt_hole(self, prompt: AssistancePrompt, state: HoleState) -> None:
        mission = self.mission()
        if prompt.hole_id and mission and prompt.hole_id in mission.holes:
            hole = mission.holes[prompt.hole_id]
            if hole.state is HoleState.FAILED:
                hole.advance(state)

    def _restart_phase(self) -> None:
        tree = self.active_tree()
        if tree is not None:
            reset(tree.runtime)
        self.phase_result = None

    # -- snapshot support -----------------------------------------------------

    def enter_phase_for_restore(self, phase: Phase, prompt: AssistancePrompt | None) -> None:
        """Adopt a persisted phase with fresh runtimes (resume-by-restart)."""
        self.phase = phase
        self.phase_result = None
        self.prompt = prompt
        self.paused = False
        for tree in self._trees.values():
            reset(tree.runtime)
        # rendezvous flags are coordination transients; a restart re-derives them
        for key, type_name in self.doc.blackboard.items():
            if type_name == "flag" and self.blackboard.has(key):
                self.blackboard.set(key, False)
