"""Service boundary: runs the orchestrator+simulator loop, persists snapshots,
streams events, and accepts operator commands.

Three cooperating parts, with no shared mutable state across them:

1. the tick loop (single thread) owning orchestrator and world;
2. an inbound command queue, multi-producer / single-consumer, drained
   between ticks in arrival order;
3. an outbound fan-out of immutable event dicts to subscribers. A slow
   subscriber is disconnected rather than ever blocking the loop.

Wire format: one JSON object per line, schema version tagged with ``"v": 1``.
The JSON schemas live in ``docs/protocol/``.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import socketserver
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .bt.core import Status
from .bt.blackboard import Blackboard
from . import dsl
from .fsm import (
    AssistancePrompt,
    Event,
    FsmError,
    Orchestrator,
    Phase,
    RejectedEvent,
    Resolution,
)
from .leaves import build_registry
from .mission import ChargeHole, ChargingMission, build_mission_trees
from .sim import InvalidScenario, SimWorld, load_scenario, make_demo_scenario

PROTOCOL_VERSION = 1
SNAPSHOT_FILE_VERSION = 1

EXIT_OK = 0
EXIT_STARTUP_FAILURE = 2
EXIT_RUNTIME_FAILURE = 3


class GatewayError(Exception):
    pass


class BindFailure(GatewayError):
    pass


class TreeValidationFailed(GatewayError):
    pass


class SnapshotNotFound(GatewayError):
    pass


class ConfigMismatch(GatewayError):
    pass


# -- tree corpus loading -------------------------------------------------------


def load_tree_corpus(trees_dir: Path | None) -> dsl.TreeDocument:
    """Merge every .tree.xml under trees_dir (default: packaged assets) into a
    single document; declarations must agree across files."""
    if trees_dir is None:
        trees_dir = Path(__file__).parent / "assets"
    files = sorted(Path(trees_dir).glob("*.tree.xml"))
    if not files:
        raise TreeValidationFailed(f"no .tree.xml files under {trees_dir}")
    merged = dsl.TreeDocument()
    for path in files:
        try:
            doc = dsl.parse_file(path)
        except dsl.DslError as err:
            raise TreeValidationFailed(f"{path.name}: {err}") from None
        for key, type_name in doc.blackboard.items():
            if merged.blackboard.get(key, type_name) != type_name:
                raise TreeValidationFailed(f"{path.name}: key {key!r} redeclared with another type")
            merged.blackboard[key] = type_name
        for name, spec in doc.behaviors.items():
            if name in merged.behaviors and merged.behaviors[name] != spec:
                raise TreeValidationFailed(f"{path.name}: behavior {name!r} redeclared differently")
            merged.behaviors[name] = spec
        for name, tree in doc.trees.items():
            if name in merged.trees:
                raise TreeValidationFailed(f"{path.name}: duplicate tree {name!r}")
            merged.trees[name] = tree
        merged.positions.update(doc.positions)
    diagnostics = dsl.validate(merged)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise TreeValidationFailed("; ".join(str(d) for d in errors))
    missing = {"PreScan", "DetectHoles", "ChargePlan", "Charging"} - set(merged.trees)
    if missing:
        raise TreeValidationFailed(f"missing phase trees: {sorted(missing)}")
    return merged


# -- blackboard persistence -----------------------------------------------------


def encode_blackboard(values: dict, mission: ChargingMission | None) -> dict:
    out = {}
    for key, value in values.items():
        if isinstance(value, ChargingMission):
            out[key] = {"$mission": value.to_json()}
        elif isinstance(value, ChargeHole):
            if mission is not None and mission.holes.get(value.id) is value:
                out[key] = {"$hole_ref": value.id}
            else:
                out[key] = {"$hole": value.to_json()}
        elif isinstance(value, list) and all(isinstance(v, ChargeHole) for v in value):
            items = []
            for v in value:
                if mission is not None and mission.holes.get(v.id) is v:
                    items.append({"$hole_ref": v.id})
                else:
                    items.append({"$hole": v.to_json()})
            out[key] = {"$holes": items}
        else:
            out[key] = {"$value": value}
    return out


def decode_blackboard(encoded: dict, blackboard: Blackboard) -> None:
    mission: ChargingMission | None = None
    for key, wrapped in encoded.items():
        if isinstance(wrapped, dict) and "$mission" in wrapped:
            mission = ChargingMission.from_json(wrapped["$mission"])
            blackboard.set(key, mission)

    def one_hole(item):
        if "$hole_ref" in item:
            return mission.holes[item["$hole_ref"]]
        return ChargeHole.from_json(item["$hole"])

    for key, wrapped in encoded.items():
        if not isinstance(wrapped, dict) or "$mission" in wrapped:
            continue
        if "$hole" in wrapped or "$hole_ref" in wrapped:
            blackboard.set(key, one_hole(wrapped))
        elif "$holes" in wrapped:
            blackboard.set(key, [one_hole(item) for item in wrapped["$holes"]])
        else:
            blackboard.set(key, wrapped.get("$value"))


# -- configuration ---------------------------------------------------------------


@dataclass
class ServiceConfig:
    scenario_path: Path | None = None
    trees_dir: Path | None = None
    listen: str | None = None
    http: str | None = None
    ui_dir: Path | None = None
    tick_rate: float = 100.0
    seed: int | None = None
    snapshot_dir: Path = Path("snapshots")
    snapshot_every: int = 100
    trace_batch_ticks: int = 10
    headless: Path | None = None
    resume: str | None = None
    event_log: Path | None = None
    max_ticks: int | None = None
    realtime: bool = True
    issued_by: str = "operator"


def _parse_addr(spec: str) -> tuple[str, int]:
    host, _, port = spec.rpartition(":")
    return host or "127.0.0.1", int(port)


# -- subscribers ------------------------------------------------------------------


class Subscriber:
    """One event consumer with a bounded queue; overflow disconnects it.

    Events are re-stamped with a per-connection seq so every consumer sees a
    strictly increasing, gap-free sequence regardless of when it attached."""

    def __init__(self, maxsize: int = 2000):
        self.queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self.alive = True
        self.needs_resync = True
        self._out_seq = 0

    def push(self, event: dict) -> None:
        if not self.alive:
            return
        self._out_seq += 1
        try:
            self.queue.put_nowait({**event, "seq": self._out_seq})
        except queue.Full:
            self.alive = False  # slow consumer: drop it, never block the loop


class Service:
    def __init__(self, config: ServiceConfig):
        self.config = config
        if config.scenario_path is not None:
            self.scenario = load_scenario(config.scenario_path)
        else:
            self.scenario = make_demo_scenario()
        self.seed = config.seed if config.seed is not None else self.scenario.seed
        self.doc = load_tree_corpus(config.trees_dir)
        self.config_hash = self._config_hash()

        self.world: SimWorld = SimWorld(self.scenario, seed=self.seed)
        self.registry = build_registry(self.world)
        self.orch = Orchestrator(self.doc, self.world, self.registry)

        self.seq = 0
        self.tick_index = 0
        self.commands: queue.Queue = queue.Queue()
        self.subscribers: list[Subscriber] = []
        self._subscribers_lock = threading.Lock()
        self._trace_buffer: list[dict] = []
        self._hole_cache: dict[str, str] = {}
        self._mission_cache: tuple[int, int] | None = None
        self._stop = threading.Event()
        self._servers: list = []
        self._event_log_fh = None
        self._latest_resync: dict = {}
        self._headless_script: list[dict] = []
        self._crash_requested = False
        self.exit_code = EXIT_OK

        Path(config.snapshot_dir).mkdir(parents=True, exist_ok=True)
        if config.event_log is not None:
            Path(config.event_log).parent.mkdir(parents=True, exist_ok=True)
            self._event_log_fh = open(config.event_log, "a", encoding="utf-8")
        if config.headless is not None:
            with open(config.headless, "r", encoding="utf-8") as fh:
                self._headless_script = json.load(fh)
            for entry in self._headless_script:
                entry.setdefault("command_id", f"script-{id(entry)}")
        if config.resume is not None:
            self._load_snapshot_file(self._resolve_snapshot_ref(config.resume))

    # -- configuration hash ------------------------------------------------------

    def _config_hash(self) -> str:
        blob = json.dumps(self.scenario.to_json(), sort_keys=True) + dsl.serialize(self.doc) + str(self.seed)
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- event plumbing -------------------------------------------------------------

    def _emit(self, kind: str, **payload) -> dict:
        self.seq += 1
        event = {"v": PROTOCOL_VERSION, "kind": kind, "seq": self.seq, "sim_time": self.world.sim_time}
        event.update(payload)
        if self._event_log_fh is not None:
            self._event_log_fh.write(json.dumps(event) + "\n")
            self._event_log_fh.flush()
        with self._subscribers_lock:
            live = []
            for sub in self.subscribers:
                if sub.needs_resync:
                    # late joiner: full state first, then the incremental flow
                    sub.needs_resync = False
                    sub.push(self._resync_event())
                sub.push(event)
                if sub.alive:
                    live.append(sub)
            self.subscribers = live
        return event

    def subscribe(self) -> Subscriber:
        sub = Subscriber()
        with self._subscribers_lock:
            self.subscribers.append(sub)
        return sub

    def _resync_event(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "kind": "ResyncState",
            "seq": 0,  # per-connection seq is assigned at push time
            "sim_time": self.world.sim_time,
            **self._state_payload(),
        }

    def _state_payload(self) -> dict:
        mission = self.orch.mission()
        prompt = self.orch.prompt
        return {
            "phase": self.orch.phase.value,
            "paused": self.orch.paused,
            "prompt": prompt.to_json() if prompt else None,
            "mission": mission.to_json() if mission else None,
            "face": {"w": self.scenario.face_w, "h": self.scenario.face_h},
            "emulsion_pumped_kg": round(self.world.total_pumped_g() / 1000.0, 6),
        }

    # -- command handling --------------------------------------------------------------

    def submit(self, command: dict) -> None:
        """Queue a command for the next inter-tick boundary."""
        self.commands.put(command)

    def apply_command(self, command: dict) -> dict:
        """Process one command now (the tick loop calls this between ticks)."""
        command_id = command.get("command_id", "")
        kind = command.get("kind", "")
        try:
            reason = self._apply(kind, command)
        except (FsmError, GatewayError, InvalidScenario) as err:
            reason = str(err)
        except KeyError as err:
            reason = f"missing field {err.args[0]!r}"
        accepted = reason is None
        ack = {
            "command_id": command_id,
            "command": kind,
            "accepted": accepted,
        }
        if not accepted:
            ack["reason"] = reason
        self._emit("CommandAck", **ack)
        return ack

    def _apply(self, kind: str, command: dict) -> str | None:
        """Returns None when accepted, otherwise a rejection reason."""
        orch = self.orch
        if kind == "StartMission":
            if orch.phase is not Phase.IDLE:
                return f"invalid transition: StartMission in {orch.phase.value}"
            ref = command.get("scenario_ref")
            if ref:
                self.scenario = load_scenario(ref)
            self._fresh_mission_state()
            self.orch.handle_event(Event.START_MISSION)
            return None
        if kind in ("StartCharging", "RePlan", "ScanAgain"):
            event = Event(kind)
            if orch.prompt is not None:
                resolution = {"RePlan": Resolution.RE_PLAN, "ScanAgain": Resolution.SCAN_AGAIN}.get(kind)
                if resolution is not None and resolution in orch.prompt.resolutions:
                    orch.resolve_assistance(resolution)
                    return None
                return "resolve the active assistance prompt first"
            try:
                orch.handle_event(event)
            except RejectedEvent as err:
                return f"invalid transition: {err}"
            return None
        if kind == "Pause":
            orch.pause()
            self._write_snapshot(cause="Pause")
            return None
        if kind == "Resume":
            orch.resume()
            return None
        if kind == "EStop":
            # always accepted: freeze ticking, halt every running action now,
            # and persist state for the restart
            orch.paused = True
            orch.halt_all()
            self._write_snapshot(cause="EStop")
            return None
        if kind == "ResolveAssistance":
            resolution = Resolution(command["resolution"])
            orch.resolve_assistance(resolution, command.get("args") or {})
            return None
        if kind == "TeleopNudge":
            hole_id = command["hole_id"]
            dx, dy = command.get("dx", 0.0), command.get("dy", 0.0)
            if orch.prompt is not None and Resolution.TELEOP_NUDGE in orch.prompt.resolutions:
                orch.resolve_assistance(
                    Resolution.TELEOP_NUDGE, {"hole_id": hole_id, "dx": dx, "dy": dy}
                )
            else:
                self.world.nudge_estimate(hole_id, dx, dy)
            return None
        if kind == "LoadSnapshot":
            if orch.phase is not Phase.IDLE and not orch.paused:
                return "snapshots load only while Idle or Paused"
            self._load_snapshot_file(self._resolve_snapshot_ref(command["ref"]))
            return None
        if kind == "Crash":
            # headless outage injection for restart drills: die without cleanup
            self._crash_requested = True
            return None
        if kind == "Shutdown":
            self._write_snapshot(cause="Shutdown")
            self._stop.set()
            return None
        return f"unknown command kind {kind!r}"

    def _fresh_mission_state(self) -> None:
        self.world = SimWorld(self.scenario, seed=self.seed)
        self.registry = build_registry(self.world)
        self.orch = Orchestrator(self.doc, self.world, self.registry)
        self._hole_cache = {}
        self._mission_cache = None

    # -- domain event diffing ---------------------------------------------------------

    def _diff_domain_state(self) -> None:
        mission = self.orch.mission()
        if mission is None:
            return
        key = (mission.revision, len(mission.order))
        if key != self._mission_cache:
            self._mission_cache = key
            self._emit("MissionUpdated", mission=mission.to_json())
        for hole in mission.holes.values():
            state = hole.state.value
            if self._hole_cache.get(hole.id) != state:
                self._hole_cache[hole.id] = state
                self._emit(
                    "HoleUpdated",
                    hole=hole.to_json(),
                    emulsion_pumped_kg=round(self.world.pumped_of(hole.id) / 1000.0, 6),
                )

    # -- snapshots -----------------------------------------------------------------------

    def _snapshot_payload(self) -> dict:
        mission = self.orch.mission()
        return {
            "v": SNAPSHOT_FILE_VERSION,
            "config_hash": self.config_hash,
            "tick": self.tick_index,
            "phase": self.orch.phase.value,
            "paused": self.orch.paused,
            "prompt": self.orch.prompt.to_json() if self.orch.prompt else None,
            "blackboard": encode_blackboard(self.orch.blackboard.as_dict(), mission),
            "sim": self.world.to_snapshot(),
        }

    def snapshot_save(self, cause: str = "interval") -> str:
        return self._write_snapshot(cause)

    def _write_snapshot(self, cause: str) -> str:
        name = f"snap-{self.tick_index:08d}.json"
        path = Path(self.config.snapshot_dir) / name
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self._snapshot_payload(), fh)
        os.replace(tmp, path)
        latest = Path(self.config.snapshot_dir) / "latest"
        with open(latest, "w", encoding="utf-8") as fh:
            fh.write(name)
        self._emit("SnapshotWritten", ref=name, cause=cause)
        return name

    def _resolve_snapshot_ref(self, ref: str) -> Path:
        directory = Path(self.config.snapshot_dir)
        if ref == "latest":
            pointer = directory / "latest"
            if not pointer.exists():
                raise SnapshotNotFound("no snapshot has been written yet")
            ref = pointer.read_text().strip()
        path = Path(ref)
        if not path.exists():
            path = directory / ref
        if not path.exists():
            raise SnapshotNotFound(f"snapshot {ref!r} not found")
        return path

    def snapshot_load(self, ref: str) -> None:
        self._load_snapshot_file(self._resolve_snapshot_ref(ref))

    def _load_snapshot_file(self, path: Path) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("v") != SNAPSHOT_FILE_VERSION:
            raise ConfigMismatch(f"snapshot file version {data.get('v')!r} unsupported")
        if data["config_hash"] != self.config_hash:
            raise ConfigMismatch("snapshot was taken under a different configuration")
        self.world = SimWorld.from_snapshot(self.scenario, data["sim"])
        self.registry = build_registry(self.world)
        self.orch = Orchestrator(self.doc, self.world, self.registry)
        decode_blackboard(data["blackboard"], self.orch.blackboard)
        prompt = None
        if data.get("prompt"):
            p = data["prompt"]
            prompt = AssistancePrompt(
                phase=Phase(p["phase"]),
                node_id=p["node_id"],
                label=p["label"],
                hole_id=p["hole_id"],
                resolutions=[Resolution(r) for r in p["resolutions"]],
                detail=p.get("detail", ""),
            )
        self.orch.enter_phase_for_restore(Phase(data["phase"]), prompt)
        self.tick_index = data["tick"]
        self._hole_cache = {}
        self._mission_cache = None
        self._emit("MissionUpdated", mission=(self.orch.mission().to_json() if self.orch.mission() else None))

    # -- tick loop ---------------------------------------------------------------------

    def _drain_commands(self) -> None:
        while True:
            try:
                command = self.commands.get_nowait()
            except queue.Empty:
                return
            self.apply_command(command)
            if self._crash_requested:
                os._exit(EXIT_RUNTIME_FAILURE)  # simulated power loss: no cleanup at all
            if self._stop.is_set():
                return

    def _due_script_commands(self) -> list[dict]:
        due = []
        for entry in self._headless_script:
            if entry.get("_fired"):
                continue
            when = entry.get("when")
            at_tick = entry.get("at_tick")
            ready = False
            if at_tick is not None and self.tick_index >= at_tick:
                ready = True
            elif when == "plan_ready":
                ready = (
                    self.orch.phase is Phase.CHARGE_PLAN
                    and self.orch.phase_result is Status.SUCCESS
                )
            elif when == "mission_complete":
                ready = self.orch.phase is Phase.MISSION_COMPLETE
            elif when == "prompt":
                ready = self.orch.prompt is not None
            if ready:
                entry["_fired"] = True
                due.append({k: v for k, v in entry.items() if not k.startswith("_") and k not in ("when", "at_tick")})
        return due

    def run(self) -> int:
        """Blocking service loop; returns the process exit code."""
        try:
            self._start_servers()
        except OSError as err:
            raise BindFailure(str(err)) from None
        self._emit("PhaseChanged", phase=self.orch.phase.value, previous=None, cause="startup")
        tick_period = 1.0 / self.config.tick_rate if self.config.tick_rate > 0 else 0.0
        next_deadline = time.monotonic()
        try:
            while not self._stop.is_set():
                for command in self._due_script_commands():
                    self.submit(command)
                self._drain_commands()
                if self._stop.is_set():
                    break
                self._tick_once()
                if self.config.max_ticks is not None and self.tick_index >= self.config.max_ticks:
                    self.exit_code = EXIT_RUNTIME_FAILURE
                    break
                if self.config.realtime and tick_period:
                    next_deadline += tick_period
                    delay = next_deadline - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                    else:
                        next_deadline = time.monotonic()
        except Exception:
            self.exit_code = EXIT_RUNTIME_FAILURE
            raise
        finally:
            self._flush_traces(force=True)
            self._shutdown_servers()
            if self._event_log_fh is not None:
                self._event_log_fh.close()
        return self.exit_code

    def _tick_once(self) -> None:
        self.tick_index += 1
        ticked_phase = self.orch.phase  # the phase whose tree produces this trace
        trace = self.orch.tick()
        self.world.step(1)
        if trace is not None:
            self._trace_buffer.append({"tick": self.tick_index, "phase": ticked_phase.value, **trace.to_json()})
        for note in self.orch.drain_outbox():
            kind = note.pop("kind")
            if kind in ("PhaseChanged", "AssistancePromptRaised", "AssistancePromptCleared"):
                self._emit(kind, **note)
        self._diff_domain_state()
        self._flush_traces()
        if self.config.snapshot_every and self.tick_index % self.config.snapshot_every == 0:
            self._write_snapshot(cause="interval")

    def _flush_traces(self, force: bool = False) -> None:
        boundary = self.tick_index % self.config.trace_batch_ticks == 0
        if not (boundary or force):
            return
        batch, self._trace_buffer = self._trace_buffer, []
        self._emit("TickTraceBatch", traces=batch)

    # -- network servers -----------------------------------------------------------------

    def _start_servers(self) -> None:
        if self.config.listen:
            host, port = _parse_addr(self.config.listen)
            server = _LineServer((host, port), self)
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self._servers.append(server)
            print(f"listening {server.server_address[0]}:{server.server_address[1]}", flush=True)
        if self.config.http:
            host, port = _parse_addr(self.config.http)
            httpd = ThreadingHTTPServer((host, port), _make_http_handler(self))
            thread = threading.Thread(target=httpd.serve_forever, daemon=True)
            thread.start()
            self._servers.append(httpd)
            print(f"http {httpd.server_address[0]}:{httpd.server_address[1]}", flush=True)

    def _shutdown_servers(self) -> None:
        for server in self._servers:
            try:
                server.shutdown()
            except Exception:
                pass
        self._servers = []

    @property
    def listen_port(self) -> int | None:
        for server in self._servers:
            if isinstance(server, _LineServer):
                return server.server_address[1]
        return None

    @property
    def http_port(self) -> int | None:
        for server in self._servers:
            if isinstance(server, ThreadingHTTPServer):
                return server.server_address[1]
        return None


# -- TCP line protocol ---------------------------------------------------------------


class _LineServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, service: Service):
        self.service = service
        super().__init__(addr, _LineHandler)


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        service: Service = self.server.service
        sub = service.subscribe()
        writer = threading.Thread(target=self._pump_events, args=(sub,), daemon=True)
        writer.start()
        try:
            for raw in self.rfile:
                line = raw.decode("utf-8", "replace").strip()
                if not line:
                    continue
                try:
                    command = json.loads(line)
                except json.JSONDecodeError:
                    sub.push(
                        {
                            "v": PROTOCOL_VERSION,
                            "kind": "CommandAck",
                            "seq": -1,
                            "sim_time": None,
                            "command_id": "",
                            "accepted": False,
                            "reason": "malformed JSON",
                        }
                    )
                    continue
                service.submit(command)
        except (ConnectionError, OSError):
            pass
        finally:
            sub.alive = False

    def _pump_events(self, sub: Subscriber) -> None:
        try:
            while sub.alive:
                try:
                    event = sub.queue.get(timeout=0.5)
                except queue.Empty:
                    continue
                self.wfile.write((json.dumps(event) + "\n").encode())
                self.wfile.flush()
        except (ConnectionError, OSError, ValueError):
            sub.alive = False


# -- HTTP endpoint (static assets, state, SSE events, command post) --------------------


def _make_http_handler(service: Service):
    ui_dir = service.config.ui_dir

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _json(self, payload, status=200):
            blob = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def do_GET(self):
            if self.path == "/trees.json":
                self._json(tree_document_json(service.doc))
            elif self.path == "/state.json":
                self._json({**service._state_payload(), "seq": service.seq, "sim_time": service.world.sim_time})
            elif self.path == "/events":
                self._sse()
            else:
                self._static()

        def do_POST(self):
            if self.path != "/command":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", "0"))
            try:
                command = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._json({"accepted": False, "reason": "malformed JSON"}, status=400)
                return
            service.submit(command)
            self._json({"queued": True, "command_id": command.get("command_id", "")})

        def _sse(self):
            sub = service.subscribe()
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            try:
                while sub.alive:
                    try:
                        event = sub.queue.get(timeout=1.0)
                    except queue.Empty:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    self.wfile.write(f"data: {json.dumps(event)}\n\n".encode())
                    self.wfile.flush()
            except (ConnectionError, OSError, ValueError):
                pass
            finally:
                sub.alive = False

        def _static(self):
            if ui_dir is None:
                self.send_error(404)
                return
            rel = self.path.lstrip("/") or "index.html"
            target = (Path(ui_dir) / rel).resolve()
            if not str(target).startswith(str(Path(ui_dir).resolve())) or not target.is_file():
                self.send_error(404)
                return
            content = target.read_bytes()
            ctype = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".json": "application/json",
            }.get(target.suffix, "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(content)))
            self.end_headers()
            self.wfile.write(content)

    return Handler


def node_json(node) -> dict:
    out = {"kind": node.kind, "id": node.node_id, "label": node.label}
    if node.kind in ("Sequence", "Fallback"):
        out["memory"] = node.memory
    elif node.kind == "Parallel":
        out["success_threshold"] = node.success_threshold
    elif node.kind == "Decorator":
        out["decorator"] = node.decorator
        if node.decorator == "RetryUntilSuccessful":
            out["max_attempts"] = node.max_attempts
    else:
        out["behavior"] = node.behavior
        out["ports"] = dict(node.ports)
    if node.children:
        out["children"] = [node_json(c) for c in node.children]
    return out


def tree_document_json(doc: dsl.TreeDocument) -> dict:
    return {
        "format": doc.format_version,
        "blackboard": dict(doc.blackboard),
        "behaviors": {
            name: {"kind": spec.kind, "ports": dict(spec.ports)} for name, spec in doc.behaviors.items()
        },
        "trees": {name: node_json(tree) for name, tree in doc.trees.items()},
    }


def export_assets(target_dir: Path) -> list[Path]:
    """Write the built-in phase trees as one .tree.xml per tree."""
    doc = build_mission_trees()
    target_dir = Path(target_dir)
    target_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, tree in doc.trees.items():
        single = dsl.TreeDocument(
            blackboard=dict(doc.blackboard),
            behaviors=dict(doc.behaviors),
            trees={name: tree},
        )
        path = target_dir / f"{_snake(name)}.tree.xml"
        dsl.serialize_to_file(single, path)
        written.append(path)
    return written


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)
