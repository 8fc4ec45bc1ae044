"""Mission data model: charge holes, ordered charging missions, and the
shipped phase trees.

A mission is an ordered queue of planned holes. The charging workflow pops
the head, charges it, and repeats until the queue is empty; preparation of
the next detonator pipelines one hole ahead via peek.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from . import dsl
from .bt.core import TreeNode, action, condition, fallback, loop_body, parallel, retry, sequence


class MissionError(Exception):
    pass


class EmptyHoleSet(MissionError):
    pass


class TooManyHoles(MissionError):
    pass


class EmptyQueue(MissionError):
    pass


class InvalidHoleTransition(MissionError):
    pass


MAX_HOLES = 100


class HoleState(enum.Enum):
    DETECTED = "Detected"
    PLANNED = "Planned"
    CHARGING = "Charging"
    CHARGED = "Charged"
    FAILED = "Failed"
    SKIPPED = "Skipped"


_ALLOWED_EDGES = {
    (HoleState.DETECTED, HoleState.PLANNED),
    (HoleState.PLANNED, HoleState.CHARGING),
    (HoleState.CHARGING, HoleState.CHARGED),
    (HoleState.CHARGING, HoleState.FAILED),
    (HoleState.FAILED, HoleState.SKIPPED),
    (HoleState.FAILED, HoleState.CHARGING),  # operator retry
}


@dataclass
class ChargeHole:
    """One drilled hole on the rock face, with its plan and lifecycle state."""

    id: str
    x: float  # face position, meters
    y: float
    depth: float  # meters, > 0
    collar_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    state: HoleState = HoleState.DETECTED
    emulsion_target: float = 0.0  # kg, set when planned
    detonator_type: str = ""

    def advance(self, new_state: HoleState) -> None:
        if new_state is self.state:
            return
        if (self.state, new_state) not in _ALLOWED_EDGES:
            raise InvalidHoleTransition(
                f"hole {self.id}: {self.state.value} -> {new_state.value} is not allowed"
            )
        self.state = new_state

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "x": self.x,
            "y": self.y,
            "depth": self.depth,
            "emulsion_target": self.emulsion_target,
            "detonator_type": self.detonator_type,
            "state": self.state.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChargeHole":
        return cls(
            id=data["id"],
            x=data["x"],
            y=data["y"],
            depth=data["depth"],
            emulsion_target=data.get("emulsion_target", 0.0),
            detonator_type=data.get("detonator_type", ""),
            state=HoleState(data.get("state", "Detected")),
        )


@dataclass
class PlanParams:
    linear_density_kg_per_m: float = 1.0
    detonator_type: str = "std-cap"
    explicit_order: list[str] | None = None  # operator override of the ordering rule


@dataclass
class ChargingMission:
    mission_id: str
    created_by: str
    revision: int = 1
    holes: dict[str, ChargeHole] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)  # remaining queue, head first
    planned_order: list[str] = field(default_factory=list)  # full order of this revision
    popped: list[str] = field(default_factory=list)
    detection_serial: int = 0  # which detection pass this plan was built from

    def queue_holes(self) -> list[ChargeHole]:
        return [self.holes[h] for h in self.order]

    def to_json(self) -> dict:
        return {
            "mission_id": self.mission_id,
            "revision": self.revision,
            "created_by": self.created_by,
            "holes": [self.holes[h].to_json() for h in sorted(self.holes)],
            "order": list(self.order),
            "planned_order": list(self.planned_order),
            "popped": list(self.popped),
            "detection_serial": self.detection_serial,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChargingMission":
        mission = cls(
            mission_id=data["mission_id"],
            created_by=data.get("created_by", ""),
            revision=data["revision"],
        )
        for item in data["holes"]:
            hole = ChargeHole.from_json(item)
            mission.holes[hole.id] = hole
        mission.order = list(data["order"])
        mission.planned_order = list(data.get("planned_order", data["order"]))
        mission.popped = list(data.get("popped", []))
        mission.detection_serial = data.get("detection_serial", 0)
        return mission

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def plan_order(holes: list[ChargeHole]) -> list[str]:
    """Bottom row first, then left to right, hole id as the final tiebreak."""
    return [h.id for h in sorted(holes, key=lambda h: (h.y, h.x, h.id))]


def plan_mission(
    detected_holes: list[ChargeHole],
    params: PlanParams | None = None,
    *,
    mission_id: str = "M1",
    created_by: str = "operator",
    revision: int = 1,
) -> ChargingMission:
    """Order the detected holes into a charging mission and dose each hole."""
    params = params or PlanParams()
    if not detected_holes:
        raise EmptyHoleSet("no holes to plan")
    if len(detected_holes) > MAX_HOLES:
        raise TooManyHoles(f"{len(detected_holes)} holes exceeds the capacity of {MAX_HOLES}")
    if params.explicit_order is not None:
        ids = {h.id for h in detected_holes}
        if sorted(params.explicit_order) != sorted(ids):
            raise MissionError("explicit_order must mention every detected hole exactly once")
        order = list(params.explicit_order)
    else:
        order = plan_order(detected_holes)
    mission = ChargingMission(mission_id=mission_id, created_by=created_by, revision=revision)
    for hole in detected_holes:
        hole.emulsion_target = params.linear_density_kg_per_m * hole.depth
        hole.detonator_type = params.detonator_type
        hole.advance(HoleState.PLANNED)
        mission.holes[hole.id] = hole
    mission.order = order
    mission.planned_order = list(order)
    return mission


def replan(mission: ChargingMission, params: PlanParams | None = None) -> ChargingMission:
    """New revision over the same mission: requeue everything not yet Charged
    (Skipped holes stay skipped; it took an explicit operator decision to skip)."""
    params = params or PlanParams()
    eligible = [
        h for h in mission.holes.values() if h.state not in (HoleState.CHARGED, HoleState.SKIPPED)
    ]
    order = (
        list(params.explicit_order)
        if params.explicit_order is not None
        else plan_order(eligible)
    )
    mission.revision += 1
    mission.order = order
    mission.planned_order = list(order)
    mission.popped = []
    return mission


def pop_next(mission: ChargingMission) -> ChargeHole:
    if not mission.order:
        raise EmptyQueue("mission queue is empty")
    hole_id = mission.order.pop(0)
    mission.popped.append(hole_id)
    hole = mission.holes[hole_id]
    hole.advance(HoleState.CHARGING)
    return hole


def peek_next(mission: ChargingMission) -> ChargeHole | None:
    if not mission.order:
        return None
    return mission.holes[mission.order[0]]


# -- shipped phase trees -------------------------------------------------------

BLACKBOARD_KEYS = {
    "detected_holes": "hole-queue",
    "mission": "hole-queue",
    "current_hole": "hole",
    "prep_hole": "hole",
    "give_ready": "flag",
    "take_ready": "flag",
}

BEHAVIOR_MANIFEST = [
    dsl.BehaviorSpec("ScanFace", "Action"),
    dsl.BehaviorSpec("DetectHoles", "Action", {"out": "hole-queue"}),
    dsl.BehaviorSpec("PlanCharges", "Action", {"holes": "hole-queue", "out": "hole-queue", "current": "hole"}),
    dsl.BehaviorSpec("PopHole", "Action", {"mission": "hole-queue", "out": "hole"}),
    dsl.BehaviorSpec("PeekNextHole", "Action", {"mission": "hole-queue", "out": "hole"}),
    dsl.BehaviorSpec("MissionQueueEmpty", "Condition", {"mission": "hole-queue", "current": "hole"}),
    dsl.BehaviorSpec("PreparationQueueEmpty", "Condition", {"mission": "hole-queue", "current": "hole"}),
    dsl.BehaviorSpec("IsRobotHoldingDetonator", "Condition"),
    dsl.BehaviorSpec("AssembleDetonator", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("InsertDetonatorInHoseTip", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("HandoverGive", "Action", {"ready": "flag", "peer": "flag"}),
    dsl.BehaviorSpec("HandoverTake", "Action", {"ready": "flag", "peer": "flag", "hole": "hole"}),
    dsl.BehaviorSpec("AtHole", "Condition", {"hole": "hole"}),
    dsl.BehaviorSpec("MoveBoomToRegion", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("PositionAtHole", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("SweepSearch", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("FeedHose", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("WiggleHose", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("PumpEmulsionWhileRetracting", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("MarkHoleCharged", "Action", {"hole": "hole"}),
    dsl.BehaviorSpec("HoleCharged", "Condition", {"hole": "hole"}),
]

HOLE = {"hole": "current_hole"}
PREP = {"hole": "prep_hole"}


def _prescan_tree() -> TreeNode:
    return sequence(
        [action("ScanFace", node_id="scan", label="Scan working area")],
        node_id="prescan_root",
        label="Pre-scan",
    )


def _detect_tree() -> TreeNode:
    return sequence(
        [action("DetectHoles", ports={"out": "detected_holes"}, node_id="detect", label="Detect holes")],
        node_id="detect_root",
        label="Detect holes",
    )


def _plan_tree() -> TreeNode:
    return sequence(
        [
            action(
                "PlanCharges",
                ports={"holes": "detected_holes", "out": "mission", "current": "current_hole"},
                node_id="plan",
                label="Generate charge plan",
            )
        ],
        node_id="plan_root",
        label="Charge plan",
    )


def _charging_tree() -> TreeNode:
    prepare_detonator = sequence(
        [
            action("PeekNextHole", ports={"mission": "mission", "out": "prep_hole"}, node_id="peek"),
            action("AssembleDetonator", ports=PREP, node_id="assemble"),
            action("InsertDetonatorInHoseTip", ports=PREP, node_id="insert_tip"),
        ],
        node_id="prep_make",
        label="Prepare detonator",
    )
    explosive_arm = fallback(
        [
            condition(
                "PreparationQueueEmpty",
                ports={"mission": "mission", "current": "current_hole"},
                node_id="prep_done",
                label="Preparation queue empty?",
            ),
            loop_body(
                sequence(
                    [
                        fallback(
                            [
                                condition(
                                    "IsRobotHoldingDetonator",
                                    node_id="holding",
                                    label="Is Robot Holding Detonator?",
                                ),
                                prepare_detonator,
                            ],
                            node_id="prep_have",
                        ),
                        action(
                            "HandoverGive",
                            ports={"ready": "give_ready", "peer": "take_ready"},
                            node_id="give",
                        ),
                    ],
                    node_id="prep_cycle",
                ),
                node_id="prep_loop",
            ),
        ],
        node_id="prep",
        label="Explosive handling",
    )

    go_to_hole = fallback(
        [
            condition("AtHole", ports=HOLE, node_id="at_hole", label="At hole?"),
            sequence(
                [
                    action("MoveBoomToRegion", ports=HOLE, node_id="boom"),
                    fallback(
                        [
                            action("PositionAtHole", ports=HOLE, node_id="position"),
                            sequence(
                                [
                                    action("SweepSearch", ports=HOLE, node_id="sweep"),
                                    action("PositionAtHole", ports=HOLE, node_id="position_after_sweep"),
                                ],
                                node_id="sweep_seq",
                            ),
                        ],
                        node_id="position_fb",
                    ),
                ],
                node_id="goto_seq",
            ),
        ],
        node_id="at_hole_fb",
        label="Position at hole!",
    )

    charge_hole = fallback(
        [
            condition("HoleCharged", ports=HOLE, node_id="hole_charged", label="Hole charged?"),
            sequence(
                [
                    fallback(
                        [
                            action("FeedHose", ports=HOLE, node_id="feed"),
                            retry(
                                sequence(
                                    [
                                        action("WiggleHose", ports=HOLE, node_id="wiggle"),
                                        action("FeedHose", ports=HOLE, node_id="feed_after_wiggle"),
                                    ],
                                    node_id="unblock_seq",
                                ),
                                max_attempts=3,
                                node_id="unblock",
                            ),
                        ],
                        node_id="feed_fb",
                    ),
                    action("PumpEmulsionWhileRetracting", ports=HOLE, node_id="pump"),
                    action("MarkHoleCharged", ports=HOLE, node_id="mark"),
                ],
                node_id="charge_seq",
            ),
        ],
        node_id="charged_fb",
        label="Charge hole!",
    )

    charging_arm = fallback(
        [
            condition(
                "MissionQueueEmpty",
                ports={"mission": "mission", "current": "current_hole"},
                node_id="queue_done",
                label="Mission queue empty?",
            ),
            loop_body(
                sequence(
                    [
                        action("PopHole", ports={"mission": "mission", "out": "current_hole"}, node_id="pop"),
                        go_to_hole,
                        action(
                            "HandoverTake",
                            ports={"ready": "take_ready", "peer": "give_ready", "hole": "current_hole"},
                            node_id="take",
                        ),
                        charge_hole,
                    ],
                    node_id="charge_cycle",
                ),
                node_id="charge_loop",
            ),
        ],
        node_id="charge",
        label="Charging and boom",
    )

    return parallel(
        [explosive_arm, charging_arm],
        success_threshold="all",
        node_id="root",
        label="Charging",
    )


PHASE_TREE_NAMES = {
    "PreScan": "PreScan",
    "DetectHoles": "DetectHoles",
    "ChargePlan": "ChargePlan",
    "Charging": "Charging",
}


def build_mission_trees() -> dsl.TreeDocument:
    """The four shipped phase trees plus their blackboard and behavior manifest."""
    doc = dsl.TreeDocument()
    doc.blackboard = dict(BLACKBOARD_KEYS)
    doc.behaviors = {spec.name: spec for spec in BEHAVIOR_MANIFEST}
    doc.trees = {
        "PreScan": _prescan_tree(),
        "DetectHoles": _detect_tree(),
        "ChargePlan": _plan_tree(),
        "Charging": _charging_tree(),
    }
    return doc

# node ids of the subtree that retrieves and assembles a new detonator; the
# detonator guard must keep these out of any cycle that starts while the
# secondary manipulator already holds one
ASSEMBLE_BRANCH_IDS = ("prep_make", "peek", "assemble", "insert_tip")
