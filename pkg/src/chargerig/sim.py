"""Deterministic seeded simulation of the charging rig and rock face.

Stands in for the real robots and vision system. All internal units are
integers (millimeters, grams, ticks) so replay and conservation checks are
exact: the same scenario, seed, and command sequence always produce the same
state trajectory, bit for bit.

Leaf behaviors (see ``chargerig.leaves``) issue work by creating activities
on actuator slots; ``step`` advances the physics one tick at a time and the
leaves observe results when polled. Discrete completion effects happen at
poll time so an interrupted run redoes work instead of losing it.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

SNAPSHOT_VERSION = 1

RNG_STREAMS = ("detection", "hole_not_found", "sweep", "blockage", "wiggle", "drop")


class SimError(Exception):
    pass


class InvalidScenario(SimError):
    pass


class IncompatibleSnapshotVersion(SimError):
    pass


def to_mm(meters: float) -> int:
    return round(meters * 1000)


def to_g(kg: float) -> int:
    return round(kg * 1000)


@dataclass
class SimParams:
    scan_ticks: int = 10
    detect_ticks: int = 5
    assemble_ticks: int = 6
    insert_ticks: int = 3
    handover_ticks: int = 4
    position_ticks: int = 5
    sweep_ticks: int = 8
    wiggle_ticks: int = 4
    boom_speed_m_per_tick: float = 0.2
    boom_region_m: float = 0.3
    feed_rate_m_per_tick: float = 0.5
    pump_rate_kg_per_tick: float = 0.5
    position_tolerance_m: float = 0.03
    detection_noise_std_m: float = 0.0
    hose_max_m: float = 6.0
    detonator_inventory: int = 40
    linear_density_kg_per_m: float = 1.0

    @classmethod
    def from_json(cls, data: dict) -> "SimParams":
        params = cls()
        for key, value in data.items():
            if not hasattr(params, key):
                raise InvalidScenario(f"unknown scenario parameter {key!r}")
            setattr(params, key, value)
        return params

    def to_json(self) -> dict:
        return dict(self.__dict__)


_SCRIPTED_KINDS = ("hole_not_found", "blockage", "estimate_offset")


@dataclass
class FaultConfig:
    p_hole_not_found_at_approach: float = 0.0
    p_sweep_recovery_success: float = 1.0
    p_hose_blockage_per_hole: float = 0.0
    p_wiggle_clears_blockage: float = 1.0
    p_detonator_drop: float = 0.0
    scripted: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if name.startswith("p_") and not 0.0 <= value <= 1.0:
                raise InvalidScenario(f"fault probability {name}={value} outside [0, 1]")
        for entry in self.scripted:
            if entry.get("kind") not in _SCRIPTED_KINDS:
                raise InvalidScenario(f"unknown scripted fault kind {entry.get('kind')!r}")
            if "hole" not in entry:
                raise InvalidScenario("scripted fault needs a hole id")

    @classmethod
    def from_json(cls, data: dict) -> "FaultConfig":
        known = {
            "p_hole_not_found_at_approach",
            "p_sweep_recovery_success",
            "p_hose_blockage_per_hole",
            "p_wiggle_clears_blockage",
            "p_detonator_drop",
            "scripted",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidScenario(f"unknown fault_config keys {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> dict:
        return {
            "p_hole_not_found_at_approach": self.p_hole_not_found_at_approach,
            "p_sweep_recovery_success": self.p_sweep_recovery_success,
            "p_hose_blockage_per_hole": self.p_hose_blockage_per_hole,
            "p_wiggle_clears_blockage": self.p_wiggle_clears_blockage,
            "p_detonator_drop": self.p_detonator_drop,
            "scripted": [dict(e) for e in self.scripted],
        }


@dataclass
class Scenario:
    face_w: float
    face_h: float
    holes: list[dict]  # {"id", "x", "y", "depth"} in meters
    seed: int
    fault_config: FaultConfig = field(default_factory=FaultConfig)
    params: SimParams = field(default_factory=SimParams)

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        try:
            face = data["face"]
            holes = data["holes"]
            seed = data["seed"]
        except KeyError as err:
            raise InvalidScenario(f"scenario missing {err.args[0]!r}") from None
        if not holes:
            raise InvalidScenario("scenario has no holes")
        seen = set()
        for hole in holes:
            for key in ("id", "x", "y", "depth"):
                if key not in hole:
                    raise InvalidScenario(f"hole entry missing {key!r}")
            if hole["depth"] <= 0:
                raise InvalidScenario(f"hole {hole['id']} depth must be > 0")
            if hole["id"] in seen:
                raise InvalidScenario(f"duplicate hole id {hole['id']!r}")
            seen.add(hole["id"])
        return cls(
            face_w=face["w"],
            face_h=face["h"],
            holes=[dict(h) for h in holes],
            seed=seed,
            fault_config=FaultConfig.from_json(data.get("fault_config", {})),
            params=SimParams.from_json(data.get("params", {})),
        )

    def to_json(self) -> dict:
        return {
            "face": {"w": self.face_w, "h": self.face_h},
            "holes": [dict(h) for h in self.holes],
            "seed": self.seed,
            "fault_config": self.fault_config.to_json(),
            "params": self.params.to_json(),
        }


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario.from_json(json.load(fh))


def make_demo_scenario(n_holes: int = 20, seed: int = 42, **fault_overrides) -> Scenario:
    """Rock face with a bottom-up grid of holes; fault-free by default."""
    holes = []
    for i in range(n_holes):
        row, col = divmod(i, 5)
        holes.append(
            {
                "id": f"H{i + 1}",
                "x": round(0.8 + col * 1.0, 3),
                "y": round(0.5 + row * 0.9, 3),
                "depth": 2.0 + (i % 4) * 0.5,
            }
        )
    return Scenario(
        face_w=6.0,
        face_h=4.5,
        holes=holes,
        seed=seed,
        fault_config=FaultConfig(**fault_overrides),
        params=SimParams(),
    )


@dataclass
class Activity:
    """In-progress work on one actuator slot; owned by the leaf node driving it."""

    kind: str
    node_id: str
    hole_id: str | None = None
    remaining: int = 0
    target_g: int = 0  # pump only


# actuator slots: one concurrent activity each
BOOM, PRIMARY, SECONDARY, HOSE = "boom", "primary", "secondary", "hose"

HANDOVER_IDLE, HANDOVER_TRANSFER, HANDOVER_DONE = "idle", "transfer", "done"


class SimWorld:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.params = scenario.params
        self.faults = scenario.fault_config
        self.seed = scenario.seed if seed is None else seed
        self.sim_time = 0

        self.truth: dict[str, dict] = {
            h["id"]: {"x": to_mm(h["x"]), "y": to_mm(h["y"]), "depth": to_mm(h["depth"])}
            for h in scenario.holes
        }
        self.estimates: dict[str, tuple[int, int]] = {}
        self.detection_serial = 0
        self.scanned = False

        self.boom = (0, 0)
        self.tool = (0, 0)
        self.positioned_hole: str | None = None
        self.estimate_serial: dict[str, int] = {}
        self.position_attempts: set[str] = set()

        self.assembled = False
        self.holding_detonator = False
        self.staged_for: str | None = None
        self.inventory = self.params.detonator_inventory

        self.armed = False
        self.armed_for: str | None = None
        self.deposited: set[str] = set()

        self.hose_deployed = 0  # mm
        self.hose_for: str | None = None
        self.blockage_mm: dict[str, int] = {}
        self.blockage_drawn: set[str] = set()

        self.pumped_g: dict[str, int] = {}
        self.pump_count: dict[str, int] = {}

        self.handover_phase = HANDOVER_IDLE
        self.handover_remaining = 0
        self.handover_consumed: set[str] = set()

        self.activities: dict[str, Activity] = {}
        self.fired_faults: set[int] = set()
        self.last_failure: str | None = None

        self.rng = {name: random.Random(f"{self.seed}:{name}") for name in RNG_STREAMS}

    # -- randomness -----------------------------------------------------

    def draw(self, stream: str, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.rng[stream].random() < p

    def gauss_mm(self, std_m: float) -> int:
        if std_m <= 0.0:
            return 0
        return round(self.rng["detection"].gauss(0.0, std_m) * 1000)

    def scripted_fault(self, kind: str, hole_id: str) -> dict | None:
        """Return and mark the matching unfired scripted fault, if any."""
        for i, entry in enumerate(self.faults.scripted):
            if i in self.fired_faults:
                continue
            if entry["kind"] == kind and entry["hole"] == hole_id:
                self.fired_faults.add(i)
                return entry
        return None

    # -- time -------------------------------------------------------------

    def step(self, ticks: int = 1) -> None:
        if ticks < 1:
            raise SimError("step needs ticks >= 1")
        for _ in range(ticks):
            self.sim_time += 1
            for activity in self.activities.values():
                self._advance(activity)
            if self.handover_phase == HANDOVER_TRANSFER:
                self.handover_remaining -= 1
                if self.handover_remaining <= 0:
                    # transfer ends: the staged unit moves from the secondary
                    # manipulator into the hose tip
                    self.holding_detonator = False
                    self.armed = True
                    self.armed_for = self.staged_for
                    self.staged_for = None
                    self.handover_phase = HANDOVER_DONE
                    self.handover_consumed = set()

    def _advance(self, activity: Activity) -> None:
        if activity.kind == "feed":
            hole = self.truth[activity.hole_id]
            limit = hole["depth"]
            block = self.blockage_mm.get(activity.hole_id)
            if block is not None:
                limit = min(limit, block)
            limit = min(limit, to_mm(self.params.hose_max_m))
            rate = to_mm(self.params.feed_rate_m_per_tick)
            self.hose_deployed = min(self.hose_deployed + rate, limit)
        elif activity.kind == "pump":
            hole_id = activity.hole_id
            target = activity.target_g
            pumped = self.pumped_g.get(hole_id, 0)
            if pumped < target:
                delta = min(to_g(self.params.pump_rate_kg_per_tick), target - pumped)
                pumped += delta
                self.pumped_g[hole_id] = pumped
                if pumped >= target:
                    # physical completion event; the exactly-once oracle
                    self.pump_count[hole_id] = self.pump_count.get(hole_id, 0) + 1
            depth = self.truth[hole_id]["depth"]
            self.hose_deployed = round(depth * (target - pumped) / target) if target else 0
        elif activity.kind == "boom_move":
            self._move_boom_toward(activity.hole_id)
        elif activity.remaining > 0:
            activity.remaining -= 1

    def _move_boom_toward(self, hole_id: str) -> None:
        ex, ey = self.estimates.get(hole_id, (self.truth[hole_id]["x"], self.truth[hole_id]["y"]))
        speed = to_mm(self.params.boom_speed_m_per_tick)
        bx, by = self.boom
        bx += max(-speed, min(speed, ex - bx))
        by += max(-speed, min(speed, ey - by))
        self.boom = (bx, by)

    # -- geometry helpers --------------------------------------------------

    def estimate_of(self, hole_id: str) -> tuple[int, int]:
        if hole_id not in self.estimates:
            raise SimError(f"hole {hole_id!r} has no detection estimate yet")
        return self.estimates[hole_id]

    def boom_in_region(self, hole_id: str) -> bool:
        ex, ey = self.estimate_of(hole_id)
        bx, by = self.boom
        tol = to_mm(self.params.boom_region_m)
        return abs(ex - bx) <= tol and abs(ey - by) <= tol

    def estimate_error_mm(self, hole_id: str) -> float:
        ex, ey = self.estimate_of(hole_id)
        tx, ty = self.truth[hole_id]["x"], self.truth[hole_id]["y"]
        return ((ex - tx) ** 2 + (ey - ty) ** 2) ** 0.5

    def set_estimate(self, hole_id: str, x_mm: int, y_mm: int) -> None:
        """Record a new observation of the hole; positioning may try again."""
        self.estimates[hole_id] = (x_mm, y_mm)
        self.estimate_serial[hole_id] = self.estimate_serial.get(hole_id, 0) + 1

    def nudge_estimate(self, hole_id: str, dx_m: float, dy_m: float) -> None:
        ex, ey = self.estimate_of(hole_id)
        self.set_estimate(hole_id, ex + to_mm(dx_m), ey + to_mm(dy_m))

    def attempt_key(self, hole_id: str) -> str:
        return f"{hole_id}:{self.estimate_serial.get(hole_id, 0)}"

    def run_detection(self) -> list[dict]:
        """Refresh estimates from ground truth (plus noise and scripted offsets);
        returns detection records in meters, sorted by hole id."""
        self.detection_serial += 1
        records = []
        for hole_id in sorted(self.truth):
            hole = self.truth[hole_id]
            ex = hole["x"] + self.gauss_mm(self.params.detection_noise_std_m)
            ey = hole["y"] + self.gauss_mm(self.params.detection_noise_std_m)
            offset = self.scripted_fault("estimate_offset", hole_id)
            if offset:
                ex += to_mm(offset.get("dx_m", 0.0))
                ey += to_mm(offset.get("dy_m", 0.0))
            self.set_estimate(hole_id, ex, ey)
            records.append(
                {"id": hole_id, "x": ex / 1000.0, "y": ey / 1000.0, "depth": hole["depth"] / 1000.0}
            )
        return records

    # -- activities --------------------------------------------------------

    def begin(self, slot: str, activity: Activity) -> None:
        self.activities[slot] = activity

    def claim(self, slot: str, kind: str, node_id: str) -> Activity | None:
        """Re-own a matching in-flight activity (same slot and kind)."""
        activity = self.activities.get(slot)
        if activity is not None and activity.kind == kind:
            activity.node_id = node_id
            return activity
        return None

    def current(self, slot: str) -> Activity | None:
        return self.activities.get(slot)

    def finish(self, slot: str) -> None:
        self.activities.pop(slot, None)

    def cancel_if_owner(self, slot: str, node_id: str) -> None:
        activity = self.activities.get(slot)
        if activity is not None and activity.node_id == node_id:
            self.activities.pop(slot)

    # -- handover ------------------------------------------------------------

    def begin_handover(self) -> None:
        if self.handover_phase == HANDOVER_IDLE:
            self.handover_phase = HANDOVER_TRANSFER
            self.handover_remaining = self.params.handover_ticks

    def consume_handover(self, side: str) -> bool:
        """Acknowledge a finished transfer; True once the transfer has completed."""
        if self.handover_phase != HANDOVER_DONE:
            return False
        self.handover_consumed.add(side)
        if self.handover_consumed >= {"give", "take"}:
            self.handover_phase = HANDOVER_IDLE
            self.handover_consumed = set()
        return True

    def abort_handover(self) -> None:
        if self.handover_phase == HANDOVER_TRANSFER:
            self.handover_phase = HANDOVER_IDLE
            self.handover_remaining = 0

    def secondary_busy(self) -> bool:
        return SECONDARY in self.activities

    # -- mission accounting ----------------------------------------------

    def target_g_of(self, hole) -> int:
        return to_g(hole.emulsion_target)

    def pumped_of(self, hole_id: str) -> int:
        return self.pumped_g.get(hole_id, 0)

    def total_pumped_g(self) -> int:
        return sum(self.pumped_g.values())

    # -- persistence ---------------------------------------------------------

    def to_snapshot(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "seed": self.seed,
            "sim_time": self.sim_time,
            "scanned": self.scanned,
            "detection_serial": self.detection_serial,
            "estimates": {k: list(v) for k, v in sorted(self.estimates.items())},
            "boom": list(self.boom),
            "tool": list(self.tool),
            "positioned_hole": self.positioned_hole,
            "estimate_serial": dict(sorted(self.estimate_serial.items())),
            "position_attempts": sorted(self.position_attempts),
            "assembled": self.assembled,
            "holding_detonator": self.holding_detonator,
            "staged_for": self.staged_for,
            "inventory": self.inventory,
            "armed": self.armed,
            "armed_for": self.armed_for,
            "deposited": sorted(self.deposited),
            "hose_deployed": self.hose_deployed,
            "hose_for": self.hose_for,
            "blockage_mm": dict(sorted(self.blockage_mm.items())),
            "blockage_drawn": sorted(self.blockage_drawn),
            "pumped_g": dict(sorted(self.pumped_g.items())),
            "pump_count": dict(sorted(self.pump_count.items())),
            "fired_faults": sorted(self.fired_faults),
            "rng": {name: _rng_state_to_json(self.rng[name]) for name in RNG_STREAMS},
        }

    @classmethod
    def from_snapshot(cls, scenario: Scenario, snapshot: dict) -> "SimWorld":
        if snapshot.get("version") != SNAPSHOT_VERSION:
            raise IncompatibleSnapshotVersion(
                f"snapshot version {snapshot.get('version')!r}, want {SNAPSHOT_VERSION}"
            )
        world = cls(scenario, seed=snapshot["seed"])
        world.sim_time = snapshot["sim_time"]
        world.scanned = snapshot["scanned"]
        world.detection_serial = snapshot["detection_serial"]
        world.estimates = {k: (v[0], v[1]) for k, v in snapshot["estimates"].items()}
        world.boom = tuple(snapshot["boom"])
        world.tool = tuple(snapshot["tool"])
        world.positioned_hole = snapshot["positioned_hole"]
        world.estimate_serial = dict(snapshot["estimate_serial"])
        world.position_attempts = set(snapshot["position_attempts"])
        world.assembled = snapshot["assembled"]
        world.holding_detonator = snapshot["holding_detonator"]
        world.staged_for = snapshot["staged_for"]
        world.inventory = snapshot["inventory"]
        world.armed = snapshot["armed"]
        world.armed_for = snapshot["armed_for"]
        world.deposited = set(snapshot["deposited"])
        world.hose_deployed = snapshot["hose_deployed"]
        world.hose_for = snapshot["hose_for"]
        world.blockage_mm = dict(snapshot["blockage_mm"])
        world.blockage_drawn = set(snapshot["blockage_drawn"])
        world.pumped_g = dict(snapshot["pumped_g"])
        world.pump_count = dict(snapshot["pump_count"])
        world.fired_faults = set(snapshot["fired_faults"])
        for name in RNG_STREAMS:
            world.rng[name].setstate(_rng_state_from_json(snapshot["rng"][name]))
        # in-flight activities and handover phases are transient: a restart
        # re-drives them from goal conditions, so they are not persisted
        world.activities = {}
        world.handover_phase = HANDOVER_IDLE
        world.handover_remaining = 0
        world.handover_consumed = set()
        return world

    def state_hash(self) -> str:
        blob = json.dumps(self.to_snapshot(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def outcome_summary(self) -> dict:
        """Mission-outcome projection used to compare interrupted runs with an
        uninterrupted baseline (time and transient poses excluded)."""
        return {
            "pumped_g": dict(sorted(self.pumped_g.items())),
            "pump_count": dict(sorted(self.pump_count.items())),
            "deposited": sorted(self.deposited),
            "inventory": self.inventory,
            "holding_detonator": self.holding_detonator,
            "armed": self.armed,
            "hose_deployed": self.hose_deployed,
        }


def _rng_state_to_json(rng: random.Random) -> list:
    version, internal, gauss_next = rng.getstate()
    return [version, list(internal), gauss_next]


def _rng_state_from_json(data: list):
    version, internal, gauss_next = data
    return (version, tuple(internal), gauss_next)
