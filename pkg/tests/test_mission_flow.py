"""End-to-end charging flow through the orchestrator, world, and shipped trees."""

from chargerig.bt.core import Status
from chargerig.fsm import Event, Phase, Resolution
from chargerig.mission import HoleState
from chargerig.sim import make_demo_scenario, to_g

from mission_harness import Harness


def charged_states(harness):
    mission = harness.mission()
    return {h.id: h.state for h in mission.holes.values()}


def test_clean_mission_charges_every_hole():
    harness = Harness(make_demo_scenario(5, seed=42))
    harness.run_mission()
    assert harness.orch.phase is Phase.MISSION_COMPLETE
    mission = harness.mission()
    assert all(h.state is HoleState.CHARGED for h in mission.holes.values())
    total = sum(to_g(h.emulsion_target) for h in mission.holes.values())
    assert harness.world.total_pumped_g() == total
    assert all(n == 1 for n in harness.world.pump_count.values())


def test_holes_are_charged_in_plan_order():
    harness = Harness(make_demo_scenario(6, seed=1))
    harness.run_mission()
    mission = harness.mission()
    assert mission.popped == mission.planned_order
    assert mission.planned_order == [f"H{i}" for i in range(1, 7)]  # grid is laid out bottom-up


def test_detonator_guard_skips_assembly_when_already_holding():
    harness = Harness(make_demo_scenario(3, seed=7))
    harness.world.holding_detonator = True  # pre-staged unit before the mission starts
    harness.world.staged_for = "H1"
    baseline_inventory = harness.world.inventory
    harness.run_mission()
    assert harness.orch.phase is Phase.MISSION_COMPLETE
    # first cycle consumed the staged unit: one fewer assembly than holes
    assert harness.world.inventory == baseline_inventory - 2


def test_sweep_recovery_on_scripted_hole_not_found():
    scenario = make_demo_scenario(4, seed=11, scripted=[{"kind": "hole_not_found", "hole": "H2"}])
    harness = Harness(scenario)
    harness.run_mission()
    assert harness.orch.phase is Phase.MISSION_COMPLETE
    assert harness.orch.prompt is None
    visited = harness.visited_nodes()
    assert "sweep" in visited
    assert "position_after_sweep" in visited


def test_wiggle_recovery_on_scripted_blockage():
    scenario = make_demo_scenario(
        4, seed=11, scripted=[{"kind": "blockage", "hole": "H3", "depth_m": 1.0}]
    )
    harness = Harness(scenario)
    harness.run_mission()
    assert harness.orch.phase is Phase.MISSION_COMPLETE
    assert "wiggle" in harness.visited_nodes()
    assert "feed_after_wiggle" in harness.visited_nodes()
    mission = harness.mission()
    assert mission.holes["H3"].state is HoleState.CHARGED


def test_unrecoverable_blockage_raises_exactly_one_prompt():
    scenario = make_demo_scenario(
        4,
        seed=11,
        p_wiggle_clears_blockage=0.0,
        scripted=[{"kind": "blockage", "hole": "H2", "depth_m": 1.0}],
    )
    harness = Harness(scenario)
    harness.run_mission()
    prompt = harness.orch.prompt
    assert prompt is not None
    assert prompt.phase is Phase.CHARGING
    assert prompt.hole_id == "H2"
    assert prompt.label == "Charge hole!"
    assert Resolution.SKIP_HOLE in prompt.resolutions
    raised = [e for e in harness.orch.drain_outbox() if e["kind"] == "AssistancePromptRaised"]
    assert len(raised) == 1
    # wiggle was attempted three times before escalating
    wiggle_failures = sum(
        1
        for _, trace in harness.traces
        for nid, status in trace.entries
        if nid == "wiggle" and status is Status.FAILURE
    )
    assert wiggle_failures == 3


def test_skip_hole_resolution_continues_mission():
    scenario = make_demo_scenario(
        4,
        seed=11,
        p_wiggle_clears_blockage=0.0,
        scripted=[{"kind": "blockage", "hole": "H2", "depth_m": 1.0}],
    )
    harness = Harness(scenario)
    harness.run_mission()
    assert harness.orch.prompt is not None
    harness.orch.resolve_assistance(Resolution.SKIP_HOLE)
    harness.run_until(lambda h: h.orch.phase is Phase.MISSION_COMPLETE)
    states = charged_states(harness)
    assert states["H2"] is HoleState.SKIPPED
    assert all(state is HoleState.CHARGED for hid, state in states.items() if hid != "H2")
    mission = harness.mission()
    assert "H2" not in mission.order


def test_teleop_nudge_then_retry_finds_hole():
    scenario = make_demo_scenario(
        3,
        seed=5,
        p_sweep_recovery_success=0.0,
        scripted=[{"kind": "estimate_offset", "hole": "H1", "dx_m": 0.05}],
    )
    harness = Harness(scenario)
    harness.run_mission()
    prompt = harness.orch.prompt
    assert prompt is not None and prompt.hole_id == "H1"
    assert prompt.label == "Position at hole!"
    harness.orch.resolve_assistance(Resolution.TELEOP_NUDGE, {"dx": -0.05, "dy": 0.0})
    harness.run_until(lambda h: h.orch.phase is Phase.MISSION_COMPLETE)
    assert charged_states(harness)["H1"] is HoleState.CHARGED


def test_assemble_failure_with_empty_inventory_prompts():
    scenario = make_demo_scenario(3, seed=5)
    scenario.params.detonator_inventory = 0
    harness = Harness(scenario)
    harness.run_mission()
    prompt = harness.orch.prompt
    assert prompt is not None
    assert prompt.node_id == "assemble"
    assert "inventory" in prompt.detail


def test_pause_resume_does_not_recharge_holes():
    harness = Harness(make_demo_scenario(6, seed=3))
    baseline = Harness(make_demo_scenario(6, seed=3))
    baseline.run_mission()

    harness.orch.handle_event(Event.START_MISSION)
    pauses = 0
    for i in range(30_000):
        if (
            harness.orch.phase is Phase.CHARGE_PLAN
            and harness.orch.phase_result is Status.SUCCESS
        ):
            harness.orch.handle_event(Event.START_CHARGING)
        if i % 17 == 0 and harness.orch.phase is Phase.CHARGING and not harness.orch.paused:
            if harness.orch.phase_result is None and pauses < 10:
                harness.orch.pause()
                harness.tick()  # frozen ticks pass wall time only
                harness.orch.resume()
                pauses += 1
        harness.tick()
        if harness.orch.phase is Phase.MISSION_COMPLETE:
            break
    assert pauses == 10
    assert harness.orch.phase is Phase.MISSION_COMPLETE
    assert all(n == 1 for n in harness.world.pump_count.values())
    assert harness.world.outcome_summary() == baseline.world.outcome_summary()


def test_replan_requeues_unfinished_holes_with_new_revision():
    harness = Harness(make_demo_scenario(6, seed=9))
    harness.orch.handle_event(Event.START_MISSION)
    # run until two holes are done, then ask for a replan
    def two_done(h):
        mission = h.mission()
        if h.orch.phase is Phase.CHARGE_PLAN and h.orch.phase_result is Status.SUCCESS:
            h.orch.handle_event(Event.START_CHARGING)
        if mission is None:
            return False
        return sum(1 for x in mission.holes.values() if x.state is HoleState.CHARGED) >= 2

    harness.run_until(two_done)
    harness.orch.handle_event(Event.RE_PLAN)
    assert harness.orch.phase is Phase.CHARGE_PLAN
    harness.run_until(lambda h: h.orch.phase_result is Status.SUCCESS, max_ticks=50)
    mission = harness.mission()
    assert mission.revision == 2
    charged = {h.id for h in mission.holes.values() if h.state is HoleState.CHARGED}
    assert charged.isdisjoint(set(mission.order))
    assert set(mission.order) | charged == set(mission.holes)
    harness.orch.handle_event(Event.START_CHARGING)
    harness.run_until(lambda h: h.orch.phase is Phase.MISSION_COMPLETE)
    assert all(n == 1 for n in harness.world.pump_count.values())


def test_at_most_one_phase_tree_has_running_nodes():
    harness = Harness(make_demo_scenario(3, seed=6))
    harness.orch.handle_event(Event.START_MISSION)
    for _ in range(3000):
        if harness.orch.phase is Phase.CHARGE_PLAN and harness.orch.phase_result is Status.SUCCESS:
            harness.orch.handle_event(Event.START_CHARGING)
        harness.tick()
        running = [
            name
            for name, tree in harness.orch._trees.items()
            if tree.runtime.any_running()
        ]
        active = harness.orch.active_tree()
        assert len(running) <= 1
        if running:
            assert active is not None and running[0] == active.name
        if harness.orch.phase is Phase.MISSION_COMPLETE:
            break
    assert harness.orch.phase is Phase.MISSION_COMPLETE


def test_deterministic_replay_same_seed_same_hashes():
    a = Harness(make_demo_scenario(3, seed=21))
    b = Harness(make_demo_scenario(3, seed=21))
    a.orch.handle_event(Event.START_MISSION)
    b.orch.handle_event(Event.START_MISSION)
    for _ in range(400):
        for h in (a, b):
            if h.orch.phase is Phase.CHARGE_PLAN and h.orch.phase_result is Status.SUCCESS:
                h.orch.handle_event(Event.START_CHARGING)
            h.tick()
        assert a.world.state_hash() == b.world.state_hash()
