"""Leaf behavior implementations against the simulated rig.

Every action here tolerates being re-ticked while its enclosing reactive
composite is running, and being restarted after a pause, outage, or operator
retry: each one checks whether its goal already holds before doing work, so
a restart never repeats an operation whose effect is already in the world.
Failures are reported as Failure statuses (never engine errors) and leave a
note on the world for the assistance prompt.
"""

from __future__ import annotations

from .bt.core import Status
from .bt.registry import ActionBehavior, BehaviorRegistry, LeafContext
from .mission import (
    ChargeHole,
    ChargingMission,
    HoleState,
    InvalidHoleTransition,
    MissionError,
    PlanParams,
    peek_next,
    plan_mission,
    pop_next,
    replan,
)
from .sim import (
    BOOM,
    HANDOVER_DONE,
    HANDOVER_TRANSFER,
    HOSE,
    PRIMARY,
    SECONDARY,
    Activity,
    SimWorld,
    to_mm,
)


class _WorldBehavior(ActionBehavior):
    def __init__(self, world: SimWorld):
        self.world = world

    def fail(self, ctx: LeafContext, message: str) -> Status:
        self.world.last_failure = f"{ctx.node_id}: {message}"
        return Status.FAILURE


def _hole_of(ctx: LeafContext) -> ChargeHole:
    return ctx.read("hole")


class _TimedBehavior(_WorldBehavior):
    """Work that occupies an actuator slot for a fixed number of ticks."""

    slot = PRIMARY
    kind = ""

    def duration(self) -> int:
        raise NotImplementedError

    def goal_met(self, ctx: LeafContext) -> bool:
        return False

    def not_ready(self, ctx: LeafContext) -> str | None:
        return None

    def on_complete(self, ctx: LeafContext) -> Status:
        return Status.SUCCESS

    def _matches(self, activity: Activity, ctx: LeafContext) -> bool:
        return activity.kind == self.kind

    def _begin(self, ctx: LeafContext) -> None:
        hole_id = _hole_of(ctx).id if "hole" in ctx.ports else None
        self.world.begin(
            self.slot, Activity(self.kind, ctx.node_id, hole_id, remaining=self.duration())
        )

    def start(self, ctx: LeafContext) -> None:
        if self.goal_met(ctx) or self.not_ready(ctx):
            return
        activity = self.world.current(self.slot)
        if activity is not None and self._matches(activity, ctx):
            activity.node_id = ctx.node_id  # take over in-flight work
        else:
            self._begin(ctx)

    def poll(self, ctx: LeafContext) -> Status:
        if self.goal_met(ctx):
            self.world.cancel_if_owner(self.slot, ctx.node_id)
            return Status.SUCCESS
        problem = self.not_ready(ctx)
        if problem:
            return self.fail(ctx, problem)
        activity = self.world.current(self.slot)
        if activity is None or not self._matches(activity, ctx):
            self._begin(ctx)
            return Status.RUNNING
        if activity.remaining > 0:
            return Status.RUNNING
        self.world.finish(self.slot)
        return self.on_complete(ctx)

    def preempt(self, ctx: LeafContext) -> None:
        self.world.cancel_if_owner(self.slot, ctx.node_id)


# -- survey and planning -----------------------------------------------------


class ScanFace(_TimedBehavior):
    slot = BOOM
    kind = "scan"

    def duration(self):
        return self.world.params.scan_ticks

    def goal_met(self, ctx):
        return self.world.scanned

    def on_complete(self, ctx):
        self.world.scanned = True
        return Status.SUCCESS


class DetectHoles(_TimedBehavior):
    slot = PRIMARY
    kind = "detect"

    def duration(self):
        return self.world.params.detect_ticks

    def not_ready(self, ctx):
        return None if self.world.scanned else "working area has not been scanned"

    def on_complete(self, ctx):
        records = self.world.run_detection()
        holes = [
            ChargeHole(id=r["id"], x=r["x"], y=r["y"], depth=r["depth"]) for r in records
        ]
        ctx.write("out", holes)
        return Status.SUCCESS


class PlanCharges(_WorldBehavior):
    """Generate (or regenerate) the charging mission from the latest detection."""

    def poll(self, ctx: LeafContext) -> Status:
        detected: list[ChargeHole] = ctx.read("holes")
        previous: ChargingMission | None = ctx.read("out") if ctx.has("out") else None
        params = PlanParams(linear_density_kg_per_m=self.world.params.linear_density_kg_per_m)
        try:
            if previous is not None and previous.detection_serial == self.world.detection_serial:
                mission = replan(previous, params)
            else:
                mission = self._fresh_plan(detected, previous, params)
        except MissionError as err:
            return self.fail(ctx, str(err))
        mission.detection_serial = self.world.detection_serial
        ctx.write("current", None)
        ctx.write("out", mission)
        return Status.SUCCESS

    def _fresh_plan(self, detected, previous, params) -> ChargingMission:
        done: dict[str, ChargeHole] = {}
        fresh: list[ChargeHole] = []
        for hole in detected:
            old = previous.holes.get(hole.id) if previous else None
            if old is not None and old.state in (HoleState.CHARGED, HoleState.SKIPPED):
                done[hole.id] = old
            else:
                fresh.append(hole)
        revision = previous.revision + 1 if previous else 1
        mission = plan_mission(fresh, params, revision=revision)
        mission.holes.update(done)
        return mission


# -- queue handling ------------------------------------------------------------


class PopHole(_WorldBehavior):
    def poll(self, ctx: LeafContext) -> Status:
        if ctx.has("out"):
            current = ctx.read("out")
            if current is not None and current.state is HoleState.CHARGING:
                return Status.SUCCESS  # in-flight hole survives restarts
        mission: ChargingMission = ctx.read("mission")
        if not mission.order:
            return self.fail(ctx, "mission queue is empty")
        hole = pop_next(mission)
        ctx.write("out", hole)
        return Status.SUCCESS


class PeekNextHole(_WorldBehavior):
    def poll(self, ctx: LeafContext) -> Status:
        mission: ChargingMission = ctx.read("mission")
        hole = peek_next(mission)
        if hole is not None:
            ctx.write("out", hole)
            return Status.SUCCESS
        # the queue drained under us; a preparation already underway for the
        # previously peeked hole stays pinned so the cycle can conclude
        if ctx.has("out") and ctx.read("out") is not None:
            world = self.world
            if world.assembled or world.holding_detonator or world.secondary_busy():
                return Status.SUCCESS
        return self.fail(ctx, "no hole left to prepare")


def cond_mission_queue_empty(ctx: LeafContext) -> bool:
    if not ctx.has("mission"):
        return False
    mission: ChargingMission = ctx.read("mission")
    if mission.order:
        return False
    current = ctx.read("current") if ctx.has("current") else None
    return current is None or current.state in (HoleState.CHARGED, HoleState.SKIPPED)


def make_preparation_queue_empty(world: SimWorld):
    def check(ctx: LeafContext) -> bool:
        if not ctx.has("mission"):
            return False
        mission: ChargingMission = ctx.read("mission")
        if peek_next(mission) is not None:
            return False
        if world.handover_phase == HANDOVER_TRANSFER:
            return False  # finish the exchange in progress
        # the charging arm still expects a handover for its in-flight hole;
        # anything staged beyond that is surplus (e.g. after a skip) and must
        # not keep the preparation arm alive with no one left to take it
        current = ctx.read("current") if ctx.has("current") else None
        if (
            current is not None
            and current.state is HoleState.CHARGING
            and not world.armed
            and current.id not in world.deposited
        ):
            return False
        return True

    return check


# -- detonator preparation ------------------------------------------------------


class AssembleDetonator(_TimedBehavior):
    slot = SECONDARY
    kind = "assemble"

    def duration(self):
        return self.world.params.assemble_ticks

    def goal_met(self, ctx):
        return self.world.assembled or self.world.holding_detonator

    def not_ready(self, ctx):
        return None if self.world.inventory > 0 else "detonator inventory is empty"

    def on_complete(self, ctx):
        self.world.inventory -= 1
        if self.world.draw("drop", self.world.faults.p_detonator_drop):
            return self.fail(ctx, "detonator dropped during assembly")
        self.world.assembled = True
        return Status.SUCCESS


class InsertDetonatorInHoseTip(_TimedBehavior):
    slot = SECONDARY
    kind = "insert"

    def duration(self):
        return self.world.params.insert_ticks

    def goal_met(self, ctx):
        return self.world.holding_detonator

    def not_ready(self, ctx):
        return None if self.world.assembled else "no assembled detonator to insert"

    def on_complete(self, ctx):
        self.world.assembled = False
        self.world.holding_detonator = True
        self.world.staged_for = _hole_of(ctx).id
        return Status.SUCCESS


class _HandoverBehavior(_WorldBehavior):
    side = ""

    def _set_ready(self, ctx, value: bool) -> None:
        key_set = ctx.has("ready") and ctx.read("ready")
        if bool(key_set) != value:
            ctx.write("ready", value)

    def _peer_ready(self, ctx) -> bool:
        return bool(ctx.has("peer") and ctx.read("peer"))

    def goal_met(self, ctx) -> bool:
        return False

    def ready_to_wait(self, ctx) -> str | None:
        return None

    def poll(self, ctx: LeafContext) -> Status:
        world = self.world
        if world.handover_phase == HANDOVER_DONE:
            world.consume_handover(self.side)
            self._set_ready(ctx, False)
            return Status.SUCCESS
        if self.goal_met(ctx):
            self._set_ready(ctx, False)
            return Status.SUCCESS
        if world.handover_phase == HANDOVER_TRANSFER:
            return Status.RUNNING
        problem = self.ready_to_wait(ctx)
        if problem:
            return self.fail(ctx, problem)
        self._set_ready(ctx, True)
        if self._peer_ready(ctx):
            world.begin_handover()
        return Status.RUNNING

    def preempt(self, ctx: LeafContext) -> None:
        self._set_ready(ctx, False)
        if self.world.handover_phase == HANDOVER_TRANSFER:
            self.world.abort_handover()
        elif self.world.handover_phase == HANDOVER_DONE:
            self.world.consume_handover(self.side)


class HandoverGive(_HandoverBehavior):
    side = "give"

    def ready_to_wait(self, ctx):
        return None if self.world.holding_detonator else "nothing staged to hand over"


class HandoverTake(_HandoverBehavior):
    side = "take"

    def goal_met(self, ctx):
        world = self.world
        if world.armed:
            return True
        hole = ctx.read("hole") if ctx.has("hole") else None
        return hole is not None and hole.id in world.deposited


# -- positioning ------------------------------------------------------------------


def make_at_hole(world: SimWorld):
    def check(ctx: LeafContext) -> bool:
        hole = _hole_of(ctx)
        return world.positioned_hole == hole.id

    return check


class MoveBoomToRegion(_WorldBehavior):
    def poll(self, ctx: LeafContext) -> Status:
        hole = _hole_of(ctx)
        if hole.id not in self.world.estimates:
            return self.fail(ctx, "hole has no detection estimate")
        if self.world.boom_in_region(hole.id):
            self.world.cancel_if_owner(BOOM, ctx.node_id)
            return Status.SUCCESS
        activity = self.world.current(BOOM)
        if activity is None or activity.kind != "boom_move" or activity.hole_id != hole.id:
            self.world.begin(BOOM, Activity("boom_move", ctx.node_id, hole.id))
        else:
            activity.node_id = ctx.node_id
        return Status.RUNNING

    def preempt(self, ctx: LeafContext) -> None:
        self.world.cancel_if_owner(BOOM, ctx.node_id)


class PositionAtHole(_TimedBehavior):
    """Fine alignment against the current estimate. One timed attempt per
    observation: repeats against the same estimate fail fast, so the recovery
    branch (sweep, teleop nudge) gets the arm instead of a futile retry."""

    slot = PRIMARY
    kind = "position"

    def duration(self):
        return self.world.params.position_ticks

    def goal_met(self, ctx):
        return self.world.positioned_hole == _hole_of(ctx).id

    def not_ready(self, ctx):
        world = self.world
        hole = _hole_of(ctx)
        if hole.id not in world.estimates:
            return "hole has no detection estimate"
        if world.attempt_key(hole.id) in world.position_attempts:
            return "already searched this estimate; a new observation is needed"
        return None

    def _matches(self, activity, ctx):
        return activity.kind == self.kind and activity.hole_id == _hole_of(ctx).id

    def on_complete(self, ctx):
        world = self.world
        hole = _hole_of(ctx)
        if world.scripted_fault("hole_not_found", hole.id) or world.draw(
            "hole_not_found", world.faults.p_hole_not_found_at_approach
        ):
            world.position_attempts.add(world.attempt_key(hole.id))
            return self.fail(ctx, "hole not found at approach")
        tolerance = to_mm(world.params.position_tolerance_m)
        if world.estimate_error_mm(hole.id) > tolerance:
            world.position_attempts.add(world.attempt_key(hole.id))
            return self.fail(ctx, "no hole within tolerance of the detected position")
        world.positioned_hole = hole.id
        world.tool = world.estimate_of(hole.id)
        return Status.SUCCESS


class SweepSearch(_TimedBehavior):
    slot = PRIMARY
    kind = "sweep"

    def duration(self):
        return self.world.params.sweep_ticks

    def _matches(self, activity, ctx):
        return activity.kind == self.kind and activity.hole_id == _hole_of(ctx).id

    def on_complete(self, ctx):
        world = self.world
        hole = _hole_of(ctx)
        if not world.draw("sweep", world.faults.p_sweep_recovery_success):
            return self.fail(ctx, "sweep did not find the hole")
        truth = world.truth[hole.id]
        world.set_estimate(
            hole.id,
            truth["x"] + world.gauss_mm(world.params.detection_noise_std_m),
            truth["y"] + world.gauss_mm(world.params.detection_noise_std_m),
        )
        return Status.SUCCESS


# -- charging -------------------------------------------------------------------


class FeedHose(_WorldBehavior):
    def start(self, ctx: LeafContext) -> None:
        world = self.world
        hole = _hole_of(ctx)
        if self._goal_met(hole) or self._not_ready(hole):
            return
        if world.hose_for != hole.id:
            world.hose_deployed = 0  # fresh hole: hose starts retracted
            world.hose_for = hole.id
        if hole.id not in world.blockage_drawn:
            world.blockage_drawn.add(hole.id)
            scripted = world.scripted_fault("blockage", hole.id)
            if scripted is not None:
                world.blockage_mm[hole.id] = to_mm(scripted["depth_m"])
            elif world.draw("blockage", world.faults.p_hose_blockage_per_hole):
                depth = world.truth[hole.id]["depth"]
                fraction = world.rng["blockage"].uniform(0.3, 0.9)
                world.blockage_mm[hole.id] = round(depth * fraction)

    def _goal_met(self, hole: ChargeHole) -> bool:
        return hole.id in self.world.deposited or self.world.pumped_of(hole.id) >= self.world.target_g_of(hole)

    def _not_ready(self, hole: ChargeHole) -> str | None:
        if self.world.positioned_hole != hole.id:
            return "not positioned at the hole"
        if not self.world.armed:
            return "no detonator in the hose tip"
        return None

    def poll(self, ctx: LeafContext) -> Status:
        world = self.world
        hole = _hole_of(ctx)
        if self._goal_met(hole):
            world.cancel_if_owner(HOSE, ctx.node_id)
            return Status.SUCCESS
        problem = self._not_ready(hole)
        if problem:
            return self.fail(ctx, problem)
        depth = world.truth[hole.id]["depth"]
        if world.hose_deployed >= depth:
            world.cancel_if_owner(HOSE, ctx.node_id)
            return Status.SUCCESS
        block = world.blockage_mm.get(hole.id)
        if block is not None and world.hose_deployed >= block:
            world.cancel_if_owner(HOSE, ctx.node_id)
            return self.fail(ctx, f"hose blocked at {block / 1000.0:.2f} m")
        activity = world.current(HOSE)
        if activity is not None and activity.kind == "feed" and activity.hole_id == hole.id:
            activity.node_id = ctx.node_id
        else:
            world.begin(HOSE, Activity("feed", ctx.node_id, hole.id))
        return Status.RUNNING

    def preempt(self, ctx: LeafContext) -> None:
        self.world.cancel_if_owner(HOSE, ctx.node_id)


class WiggleHose(_TimedBehavior):
    slot = HOSE
    kind = "wiggle"

    def duration(self):
        return self.world.params.wiggle_ticks

    def goal_met(self, ctx):
        return _hole_of(ctx).id not in self.world.blockage_mm

    def _matches(self, activity, ctx):
        return activity.kind == self.kind and activity.hole_id == _hole_of(ctx).id

    def on_complete(self, ctx):
        world = self.world
        hole = _hole_of(ctx)
        if world.draw("wiggle", world.faults.p_wiggle_clears_blockage):
            world.blockage_mm.pop(hole.id, None)
            return Status.SUCCESS
        return self.fail(ctx, "wiggling did not clear the blockage")


class PumpEmulsionWhileRetracting(_WorldBehavior):
    def start(self, ctx: LeafContext) -> None:
        world = self.world
        hole = _hole_of(ctx)
        target = world.target_g_of(hole)
        if world.pumped_of(hole.id) >= target:
            return
        if hole.id not in world.deposited:
            if world.hose_deployed < world.truth[hole.id]["depth"] or not world.armed:
                return  # poll reports the precondition failure
            # the primed unit leaves the tip at the bottom as retraction begins
            world.deposited.add(hole.id)
            world.armed = False
            world.armed_for = None
        activity = world.current(HOSE)
        if activity is not None and activity.kind == "pump" and activity.hole_id == hole.id:
            activity.node_id = ctx.node_id
        else:
            world.begin(HOSE, Activity("pump", ctx.node_id, hole.id, target_g=target))

    def poll(self, ctx: LeafContext) -> Status:
        world = self.world
        hole = _hole_of(ctx)
        target = world.target_g_of(hole)
        if world.pumped_of(hole.id) >= target:
            activity = world.current(HOSE)
            if activity is not None and activity.kind == "pump" and activity.hole_id == hole.id:
                world.finish(HOSE)
            return Status.SUCCESS
        if hole.id not in world.deposited:
            return self.fail(ctx, "hose is not at the bottom with a primed detonator")
        activity = world.current(HOSE)
        if activity is None or activity.kind != "pump" or activity.hole_id != hole.id:
            world.begin(HOSE, Activity("pump", ctx.node_id, hole.id, target_g=target))
        else:
            activity.node_id = ctx.node_id
        return Status.RUNNING

    def preempt(self, ctx: LeafContext) -> None:
        self.world.cancel_if_owner(HOSE, ctx.node_id)


class MarkHoleCharged(_WorldBehavior):
    def poll(self, ctx: LeafContext) -> Status:
        hole = _hole_of(ctx)
        if hole.state is HoleState.CHARGED:
            return Status.SUCCESS
        try:
            hole.advance(HoleState.CHARGED)
        except InvalidHoleTransition as err:
            return self.fail(ctx, str(err))
        return Status.SUCCESS


def cond_hole_charged(ctx: LeafContext) -> bool:
    return _hole_of(ctx).state is HoleState.CHARGED


def make_is_holding_detonator(world: SimWorld):
    def check(ctx: LeafContext) -> bool:
        return world.holding_detonator

    return check


def build_registry(world: SimWorld) -> BehaviorRegistry:
    """Register the full leaf toolbox the shipped phase trees reference."""
    registry = BehaviorRegistry()
    registry.register("ScanFace", ScanFace(world))
    registry.register("DetectHoles", DetectHoles(world))
    registry.register("PlanCharges", PlanCharges(world))
    registry.register("PopHole", PopHole(world))
    registry.register("PeekNextHole", PeekNextHole(world))
    registry.register_condition("MissionQueueEmpty", cond_mission_queue_empty)
    registry.register_condition("PreparationQueueEmpty", make_preparation_queue_empty(world))
    registry.register_condition("IsRobotHoldingDetonator", make_is_holding_detonator(world))
    registry.register("AssembleDetonator", AssembleDetonator(world))
    registry.register("InsertDetonatorInHoseTip", InsertDetonatorInHoseTip(world))
    registry.register("HandoverGive", HandoverGive(world))
    registry.register("HandoverTake", HandoverTake(world))
    registry.register_condition("AtHole", make_at_hole(world))
    registry.register("MoveBoomToRegion", MoveBoomToRegion(world))
    registry.register("PositionAtHole", PositionAtHole(world))
    registry.register("SweepSearch", SweepSearch(world))
    registry.register("FeedHose", FeedHose(world))
    registry.register("WiggleHose", WiggleHose(world))
    registry.register("PumpEmulsionWhileRetracting", PumpEmulsionWhileRetracting(world))
    registry.register("MarkHoleCharged", MarkHoleCharged(world))
    registry.register_condition("HoleCharged", cond_hole_charged)
    return registry
