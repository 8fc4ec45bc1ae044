"""Mission reporting: rebuild session state from an event log and render it.

The gateway's event stream is complete enough to reconstruct the session
without any other data source; the report path folds a JSONL event log into
final mission state and writes a delimited summary plus rock-face and
timeline figures next to it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

STATE_COLORS = {
    "Detected": "#9e9e9e",
    "Planned": "#1f77b4",
    "Charging": "#ff7f0e",
    "Charged": "#2ca02c",
    "Failed": "#d62728",
    "Skipped": "#7f7f7f",
}


@dataclass
class SessionReplay:
    """Final state folded from an event log (the event-sourcing consumer)."""

    phases: list[tuple[int, str]] = field(default_factory=list)  # (sim_time, phase)
    mission: dict | None = None
    holes: dict[str, dict] = field(default_factory=dict)
    pumped_kg: dict[str, float] = field(default_factory=dict)
    prompts: list[dict] = field(default_factory=list)
    snapshots: list[str] = field(default_factory=list)
    face: dict | None = None
    last_sim_time: int = 0
    events: int = 0

    def apply(self, event: dict) -> None:
        self.events += 1
        sim_time = event.get("sim_time") or 0
        self.last_sim_time = max(self.last_sim_time, sim_time)
        kind = event.get("kind")
        if kind == "ResyncState":
            if event.get("face"):
                self.face = event["face"]
            if event.get("mission"):
                self._adopt_mission(event["mission"])
            if event.get("phase"):
                self.phases.append((sim_time, event["phase"]))
        elif kind == "PhaseChanged":
            self.phases.append((sim_time, event["phase"]))
        elif kind == "MissionUpdated":
            if event.get("mission"):
                self._adopt_mission(event["mission"])
        elif kind == "HoleUpdated":
            hole = event["hole"]
            self.holes[hole["id"]] = hole
            self.pumped_kg[hole["id"]] = event.get("emulsion_pumped_kg", 0.0)
        elif kind == "AssistancePromptRaised":
            self.prompts.append({"sim_time": sim_time, **event.get("prompt", {})})
        elif kind == "SnapshotWritten":
            self.snapshots.append(event.get("ref", ""))

    def _adopt_mission(self, mission: dict) -> None:
        self.mission = mission
        for hole in mission.get("holes", []):
            self.holes.setdefault(hole["id"], hole)

    @property
    def final_phase(self) -> str:
        return self.phases[-1][1] if self.phases else "Idle"


def replay_log(path) -> SessionReplay:
    replay = SessionReplay()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                replay.apply(json.loads(line))
    return replay


def write_report(log_path, out_dir) -> dict[str, Path]:
    """Render report.csv, face_map.png, and timeline.png from an event log."""
    replay = replay_log(log_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "csv": _write_csv(replay, out_dir / "report.csv"),
        "face_map": _draw_face_map(replay, out_dir / "face_map.png"),
        "timeline": _draw_timeline(replay, out_dir / "timeline.png"),
    }
    return outputs


def _hole_rows(replay: SessionReplay) -> list[dict]:
    order = {}
    if replay.mission:
        for i, hole_id in enumerate(replay.mission.get("planned_order", [])):
            order[hole_id] = i + 1
    rows = []
    for hole_id in sorted(replay.holes):
        hole = replay.holes[hole_id]
        rows.append(
            {
                "hole_id": hole_id,
                "x_m": hole.get("x", 0.0),
                "y_m": hole.get("y", 0.0),
                "depth_m": hole.get("depth", 0.0),
                "plan_position": order.get(hole_id, ""),
                "emulsion_target_kg": hole.get("emulsion_target", 0.0),
                "emulsion_pumped_kg": replay.pumped_kg.get(hole_id, 0.0),
                "state": hole.get("state", "Detected"),
            }
        )
    return rows


def _write_csv(replay: SessionReplay, path: Path) -> Path:
    rows = _hole_rows(replay)
    fields = [
        "hole_id",
        "x_m",
        "y_m",
        "depth_m",
        "plan_position",
        "emulsion_target_kg",
        "emulsion_pumped_kg",
        "state",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return path


def _draw_face_map(replay: SessionReplay, path: Path) -> Path:
    rows = _hole_rows(replay)
    fig, ax = plt.subplots(figsize=(7, 5))
    if replay.face:
        ax.set_xlim(0, replay.face.get("w", 6.0))
        ax.set_ylim(0, replay.face.get("h", 4.5))
    seen_states = []
    for row in rows:
        color = STATE_COLORS.get(row["state"], "#000000")
        label = row["state"] if row["state"] not in seen_states else None
        if label:
            seen_states.append(label)
        size = 60 + 40 * float(row["depth_m"] or 0)
        ax.scatter(row["x_m"], row["y_m"], s=size, c=color, label=label, edgecolors="black", zorder=3)
        ax.annotate(row["hole_id"], (row["x_m"], row["y_m"]), textcoords="offset points", xytext=(6, 6), fontsize=8)
    if replay.mission:
        planned = [h for h in replay.mission.get("planned_order", []) if h in replay.holes]
        xs = [replay.holes[h].get("x", 0) for h in planned]
        ys = [replay.holes[h].get("y", 0) for h in planned]
        ax.plot(xs, ys, color="#bbbbbb", linewidth=1, zorder=1, label="charging order")
    ax.set_xlabel("face x [m]")
    ax.set_ylabel("face y [m]")
    ax.set_title(f"Rock face after session (final phase: {replay.final_phase})")
    if seen_states or replay.mission:
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _draw_timeline(replay: SessionReplay, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    phases = replay.phases or [(0, "Idle")]
    names = sorted({name for _, name in phases})
    lanes = {name: i for i, name in enumerate(names)}
    end = max(replay.last_sim_time, phases[-1][0] + 1)
    for (t0, name), (t1, _) in zip(phases, phases[1:] + [(end, "")]):
        color = "#ff7f0e" if name == "Charging" else "#1f77b4"
        ax.hlines(lanes[name], t0, max(t1, t0 + 1), linewidth=8, color=color)
    for prompt in replay.prompts:
        ax.axvline(prompt.get("sim_time", 0), color="#d62728", linestyle=":", linewidth=1)
    ax.set_yticks(list(lanes.values()), list(lanes.keys()))
    ax.set_xlabel("simulated ticks")
    ax.set_title("Phase timeline")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
